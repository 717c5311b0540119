import numpy as np

from .errors import NumericalError


def l2_normalize(x):
    """Scale ``x`` (a vector, or each row of a matrix) to unit Euclidean norm."""
    x = np.asarray(x, dtype=np.float64)
    norms = np.linalg.norm(x, axis=-1, keepdims=True)
    if np.any(norms == 0.0):
        raise NumericalError("cannot normalize a zero vector")
    return x / norms


def l2_normalize_backward(x, grad_unit):
    """Pull a gradient w.r.t. ``x / |x|`` back to ``x`` (row-wise)."""
    x = np.asarray(x, dtype=np.float64)
    norms = np.linalg.norm(x, axis=-1, keepdims=True)
    u = x / norms
    return (grad_unit - u * np.sum(u * grad_unit, axis=-1, keepdims=True)) / norms
