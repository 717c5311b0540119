"""Loss functions with analytic gradients.

Single-triplet losses return gradients as a (3, D) array in the row order
(anchor, positive, negative).  Batch losses return one gradient row per batch
sample, accumulated over every tuplet role the sample plays.

Hinge losses use the subgradient 0 exactly at the kink.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from ._linalg import l2_normalize, l2_normalize_backward
from .errors import InvalidInputError, NumericalError
from .geometry import Triplet, as_vector, check_alpha
from .sampling import NPairBatch

DEFAULT_MARGIN = 0.1
DEFAULT_LAMBDA = 2.0


@dataclass
class LossResult:
    value: float
    gradients: np.ndarray
    # per-anchor log-sum-exp terms for batch losses, None otherwise
    terms: np.ndarray = field(default=None, repr=False)

    @property
    def anchor(self):
        return self.gradients[0]

    @property
    def positive(self):
        return self.gradients[1]

    @property
    def negative(self):
        return self.gradients[2]


@dataclass(frozen=True)
class AngularParams:
    alpha_degrees: float
    tan_sq_alpha: float = field(init=False)

    def __post_init__(self):
        alpha = check_alpha(self.alpha_degrees)
        object.__setattr__(self, "alpha_degrees", alpha)
        object.__setattr__(self, "tan_sq_alpha", math.tan(math.radians(alpha)) ** 2)


def _params(params):
    return params if isinstance(params, AngularParams) else AngularParams(params)


def _check_margin(margin):
    if not margin >= 0.0:
        raise InvalidInputError(f"margin must be >= 0, got {margin}")


# ---------------------------------------------------------------------------
# single triplet
# ---------------------------------------------------------------------------


def triplet_hinge_argument(t: Triplet, margin):
    return float(np.sum((t.anchor - t.positive) ** 2) - np.sum((t.anchor - t.negative) ** 2) + margin)


def triplet_loss(t: Triplet, margin=DEFAULT_MARGIN) -> LossResult:
    _check_margin(margin)
    arg = triplet_hinge_argument(t, margin)
    if arg <= 0.0:
        return LossResult(0.0, np.zeros((3, t.dim)))
    a, p, n = t.anchor, t.positive, t.negative
    grads = np.stack([2.0 * (n - p), 2.0 * (p - a), 2.0 * (a - n)])
    return LossResult(arg, grads)


def angular_hinge_argument(t: Triplet, params):
    tsq = _params(params).tan_sq_alpha
    c = 0.5 * (t.anchor + t.positive)
    return float(np.sum((t.anchor - t.positive) ** 2) - 4.0 * tsq * np.sum((t.negative - c) ** 2))


def angular_loss(t: Triplet, params) -> LossResult:
    """Hinge angular loss ``[|a - p|^2 - 4 tan^2(alpha) |n - c|^2]_+``."""
    params = _params(params)
    arg = angular_hinge_argument(t, params)
    if arg <= 0.0:
        return LossResult(0.0, np.zeros((3, t.dim)))
    tsq = params.tan_sq_alpha
    a, p, n = t.anchor, t.positive, t.negative
    pull = 2.0 * tsq * (a + p - 2.0 * n)
    grads = np.stack([2.0 * (a - p) - pull, 2.0 * (p - a) - pull, 2.0 * pull])
    return LossResult(arg, grads)


def f_apn(anchor, positive, negative, params):
    """Constant-dropped surrogate of the angular hinge argument.

    For unit-norm inputs it differs from :func:`angular_hinge_argument` by
    exactly ``-(2 - 6 tan^2 alpha)``.
    """
    a = as_vector(anchor, "anchor")
    p = as_vector(positive, "positive")
    n = as_vector(negative, "negative")
    if not a.shape == p.shape == n.shape:
        raise InvalidInputError("dimension mismatch")
    tsq = _params(params).tan_sq_alpha
    return float(4.0 * tsq * np.dot(a + p, n) - 2.0 * (1.0 + tsq) * np.dot(a, p))


def triplet_loss_mean(triplets, margin=DEFAULT_MARGIN) -> LossResult:
    """Mean triplet loss over a list of disjoint triplets; gradients are (T, 3, D)."""
    results = [triplet_loss(t, margin) for t in triplets]
    if not results:
        raise InvalidInputError("empty triplet list")
    value = sum(r.value for r in results) / len(results)
    grads = np.stack([r.gradients for r in results]) / len(results)
    return LossResult(value, grads)


# ---------------------------------------------------------------------------
# N-pair batches
# ---------------------------------------------------------------------------


def _batch_vectors(batch):
    if not isinstance(batch, NPairBatch):
        raise InvalidInputError("expected an NPairBatch")
    return batch.vectors


def _maybe_normalized(batch, normalize, compute):
    X = _batch_vectors(batch)
    if not normalize:
        value, grad, terms = compute(X)
    else:
        value, grad_u, terms = compute(l2_normalize(X))
        grad = l2_normalize_backward(X, grad_u)
    if not (math.isfinite(value) and np.all(np.isfinite(grad))):
        raise NumericalError("batch loss produced a non-finite value")
    return LossResult(value, grad, terms)


def _lse(batch, c_an, c_pn, c_ap, normalize):
    def compute(X):
        terms, grad = _kernels.tuplet_lse(X, batch.partner, batch.labels, c_an, c_pn, c_ap)
        return float(terms.mean()), grad, terms

    return _maybe_normalized(batch, normalize, compute)


def angular_loss_batch(batch: NPairBatch, params, normalize=False) -> LossResult:
    """Log-sum-exp angular loss averaged over the ``N`` tuplets of a batch.

    ``f_apn`` is used verbatim whatever the input norms; pass
    ``normalize=True`` to project the inputs onto the unit sphere first
    (gradients then flow through the projection).
    """
    tsq = _params(params).tan_sq_alpha
    return _lse(batch, 4.0 * tsq, 4.0 * tsq, -2.0 * (1.0 + tsq), normalize)


def npair_loss_batch(batch: NPairBatch, normalize=False) -> LossResult:
    return _lse(batch, 1.0, 0.0, -1.0, normalize)


def combined_loss_batch(batch: NPairBatch, params, lam=DEFAULT_LAMBDA, normalize=False) -> LossResult:
    """N-pair loss plus ``lam`` times the batch angular loss."""
    if not lam >= 0.0:
        raise InvalidInputError(f"lambda must be >= 0, got {lam}")
    npair = npair_loss_batch(batch, normalize)
    if lam == 0.0:
        return npair
    ang = angular_loss_batch(batch, params, normalize)
    return LossResult(npair.value + lam * ang.value, npair.gradients + lam * ang.gradients,
                      npair.terms + lam * ang.terms)


def triplet_loss_batch(batch: NPairBatch, margin=DEFAULT_MARGIN, normalize=False) -> LossResult:
    """Triplet hinge averaged over every (anchor, positive, negative) of the tuplets."""
    _check_margin(margin)

    def compute(X):
        value, grad = _kernels.tuplet_hinge(X, batch.partner, batch.labels, margin)
        return float(value), grad, None

    return _maybe_normalized(batch, normalize, compute)


# ---------------------------------------------------------------------------
# finite differences
# ---------------------------------------------------------------------------


def finite_difference_gradient(loss_fn, inputs, step=1e-5, vectorized=False):
    """Central-difference gradient of a scalar ``loss_fn`` at ``inputs``.

    ``inputs`` may have any shape; the result has the same shape.  With
    ``vectorized=True``, ``loss_fn`` receives a stack of shape
    ``(2 * inputs.size, *inputs.shape)`` holding every +h / -h perturbation
    and must return one value per stack entry.
    """
    if not step > 0.0:
        raise InvalidInputError("step must be positive")
    x = np.asarray(inputs, dtype=np.float64)
    m = x.size
    if vectorized:
        stack = np.empty((2 * m,) + x.shape)
        stack[...] = x
        flat = stack.reshape(2 * m, m)
        diag = np.arange(m)
        flat[diag, diag] += step
        flat[m + diag, diag] -= step
        vals = np.asarray(loss_fn(stack), dtype=np.float64)
        if not np.all(np.isfinite(vals)):
            raise NumericalError("loss is non-finite at a perturbed point")
        return ((vals[:m] - vals[m:]) / (2.0 * step)).reshape(x.shape)
    grad = np.empty(m)
    flat = x.reshape(-1).copy()
    for i in range(m):
        old = flat[i]
        flat[i] = old + step
        fp = float(loss_fn(flat.reshape(x.shape)))
        flat[i] = old - step
        fm = float(loss_fn(flat.reshape(x.shape)))
        flat[i] = old
        if not (math.isfinite(fp) and math.isfinite(fm)):
            raise NumericalError("loss is non-finite at a perturbed point")
        grad[i] = (fp - fm) / (2.0 * step)
    return grad.reshape(x.shape)


def relative_gradient_error(analytic, numeric, floor=1.0):
    """``max|analytic - numeric| / max(|analytic|_inf, |numeric|_inf, floor)``."""
    analytic = np.asarray(analytic, dtype=np.float64)
    numeric = np.asarray(numeric, dtype=np.float64)
    scale = max(np.max(np.abs(analytic), initial=0.0), np.max(np.abs(numeric), initial=0.0), floor)
    return float(np.max(np.abs(analytic - numeric), initial=0.0) / scale)
