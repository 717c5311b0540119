"""Triplet triangles and the two constraints defined on them.

The angular constraint bounds the angle at the negative vertex of a
reconstructed triangle: the anchor/positive pair is replaced by its midpoint
``x_c`` and a point on the circle of radius ``|x_a - x_p| / 2`` around it, so
that ``tan(angle) = radius / |x_n - x_c|``.
"""

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError


def as_vector(x, name="vector"):
    v = np.asarray(x, dtype=np.float64)
    if v.ndim != 1 or v.size == 0:
        raise InvalidInputError(f"{name} must be a non-empty 1-d vector, got shape {v.shape}")
    if not np.all(np.isfinite(v)):
        raise InvalidInputError(f"{name} has non-finite components")
    return v


def _same_dim(*vectors):
    dims = {v.shape[0] for v in vectors}
    if len(dims) != 1:
        raise InvalidInputError(f"dimension mismatch: {sorted(dims)}")


@dataclass(frozen=True)
class Triplet:
    anchor: np.ndarray
    positive: np.ndarray
    negative: np.ndarray

    def __post_init__(self):
        a = as_vector(self.anchor, "anchor")
        p = as_vector(self.positive, "positive")
        n = as_vector(self.negative, "negative")
        _same_dim(a, p, n)
        object.__setattr__(self, "anchor", a)
        object.__setattr__(self, "positive", p)
        object.__setattr__(self, "negative", n)

    @property
    def dim(self):
        return self.anchor.shape[0]

    def stacked(self):
        """Rows (anchor, positive, negative) as a (3, D) array."""
        return np.stack([self.anchor, self.positive, self.negative])

    def transformed(self, rotation=None, shift=None, scale=1.0):
        """Apply ``x -> scale * rotation @ x + shift`` to all three points."""
        pts = self.stacked()
        if rotation is not None:
            pts = pts @ np.asarray(rotation, dtype=np.float64).T
        pts = scale * pts
        if shift is not None:
            pts = pts + np.asarray(shift, dtype=np.float64)
        return Triplet(*pts)


@dataclass(frozen=True)
class TriangleGeometry:
    center: np.ndarray
    radius: float
    negative_to_center_dist: float
    tan_angle_n_prime: float  # math.inf when the negative sits on the center

    @property
    def angle_n_prime_degrees(self):
        return math.degrees(math.atan(self.tan_angle_n_prime))


def positive_center(anchor, positive):
    a = as_vector(anchor, "anchor")
    p = as_vector(positive, "positive")
    _same_dim(a, p)
    return 0.5 * (a + p)


def triangle_geometry(t: Triplet) -> TriangleGeometry:
    center = 0.5 * (t.anchor + t.positive)
    radius = 0.5 * float(np.linalg.norm(t.anchor - t.positive))
    dist = float(np.linalg.norm(t.negative - center))
    if dist > 0.0:
        tan = radius / dist
    elif radius == 0.0:
        # all three points coincide; treated as a satisfied, zero-width triangle
        tan = 0.0
    else:
        tan = math.inf
    return TriangleGeometry(center, radius, dist, tan)


def triplet_constraint_satisfied(t: Triplet, margin: float) -> bool:
    """True iff ``|x_a - x_p|^2 + margin <= |x_a - x_n|^2``."""
    if not margin >= 0.0:
        raise InvalidInputError(f"margin must be >= 0, got {margin}")
    d_ap = float(np.sum((t.anchor - t.positive) ** 2))
    d_an = float(np.sum((t.anchor - t.negative) ** 2))
    return d_ap + margin <= d_an


def check_alpha(alpha_degrees):
    alpha = float(alpha_degrees)
    if not 0.0 < alpha < 90.0:
        raise InvalidInputError(f"alpha must lie in (0, 90) degrees, got {alpha_degrees}")
    return alpha


def angular_constraint_satisfied(t: Triplet, alpha_degrees: float) -> bool:
    """True iff the reconstructed angle at the negative is at most ``alpha``.

    Compared in angle space via ``atan2`` so that exact boundary cases
    (e.g. 45 degrees, where ``tan`` rounds below 1) are decided correctly.
    """
    alpha = check_alpha(alpha_degrees)
    radius = 0.5 * float(np.linalg.norm(t.anchor - t.positive))
    d_nc = float(np.linalg.norm(t.negative - 0.5 * (t.anchor + t.positive)))
    return math.atan2(radius, d_nc) <= math.radians(alpha)
