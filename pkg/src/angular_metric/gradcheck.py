"""Finite-difference verification of every analytic loss gradient.

The reference values here are computed straight from the loss definitions
(distances, dot products, ``np.logaddexp``), vectorized over a stack of
perturbed inputs, and never touch the gradient code they are checking.
"""

from dataclasses import dataclass

import numpy as np

from . import losses
from .errors import InvalidInputError
from .geometry import Triplet
from .sampling import NPairBatch, make_rng

KINK_GUARD = 1e-3
GRAD_FLOOR = 1e-3

SINGLE_LOSSES = ("triplet", "angular")
BATCH_LOSSES = ("angular-batch", "npair", "npair-angular", "triplet-npair")
CHECKABLE = SINGLE_LOSSES + BATCH_LOSSES


# -- reference values over stacks --------------------------------------------


def ref_triplet_values(S, margin):
    """``S`` has shape (M, 3, D); returns hinge values and hinge arguments."""
    a, p, n = S[:, 0], S[:, 1], S[:, 2]
    arg = np.sum((a - p) ** 2, axis=-1) - np.sum((a - n) ** 2, axis=-1) + margin
    return np.maximum(arg, 0.0), arg


def ref_angular_values(S, alpha_degrees):
    tsq = np.tan(np.radians(alpha_degrees)) ** 2
    a, p, n = S[:, 0], S[:, 1], S[:, 2]
    c = (a + p) / 2.0
    arg = np.sum((a - p) ** 2, axis=-1) - 4.0 * tsq * np.sum((n - c) ** 2, axis=-1)
    return np.maximum(arg, 0.0), arg


def _gram(S):
    return np.matmul(S, np.swapaxes(S, 1, 2))


def _per_anchor_lse(G, labels, logit):
    """Mean over anchors of ``log(1 + sum_n exp(logit))``, from Gram matrices ``G``."""
    m, n = G.shape[0], G.shape[1]
    total = np.zeros(m)
    one = np.zeros((m, 1))
    for i in range(n):
        p = i ^ 1
        negs = np.flatnonzero(labels != labels[i])
        z = logit(G[:, i, negs], G[:, p, negs], G[:, i, p][:, None])
        total += np.logaddexp.reduce(np.concatenate([one, z], axis=1), axis=1)
    return total / n


def _npair_logit(an, pn, ap):
    return an - ap


def _angular_logit(alpha_degrees):
    tsq = np.tan(np.radians(alpha_degrees)) ** 2
    return lambda an, pn, ap: 4.0 * tsq * (an + pn) - 2.0 * (1.0 + tsq) * ap


def ref_npair_values(S, labels):
    return _per_anchor_lse(_gram(S), labels, _npair_logit)


def ref_angular_batch_values(S, labels, alpha_degrees):
    return _per_anchor_lse(_gram(S), labels, _angular_logit(alpha_degrees))


def ref_combined_values(S, labels, alpha_degrees, lam):
    G = _gram(S)
    return (_per_anchor_lse(G, labels, _npair_logit)
            + lam * _per_anchor_lse(G, labels, _angular_logit(alpha_degrees)))


def ref_triplet_batch_values(S, labels, margin):
    G = _gram(S)
    sq = np.diagonal(G, axis1=1, axis2=2)
    D2 = sq[:, :, None] + sq[:, None, :] - 2.0 * G
    n = S.shape[1]
    args = []
    for i in range(n):
        negs = np.flatnonzero(labels != labels[i])
        args.append(D2[:, i, i ^ 1][:, None] - D2[:, i, negs] + margin)
    args = np.concatenate(args, axis=1)
    return np.maximum(args, 0.0).mean(axis=1), args


# -- one trial ----------------------------------------------------------------


@dataclass
class GradCheckSummary:
    loss: str
    trials: int
    dim: int
    checked: int
    skipped_kink: int
    max_rel_error: float
    tol: float

    @property
    def passed(self):
        return self.checked > 0 and self.max_rel_error < self.tol

    def format(self):
        status = "PASS" if self.passed else "FAIL"
        return (f"loss={self.loss} trials={self.trials} dim={self.dim} checked={self.checked} "
                f"skipped_kink={self.skipped_kink} max_rel_error={self.max_rel_error:.3e} "
                f"tol={self.tol:.3e} {status}")


def _fd(values, x, step):
    return losses.finite_difference_gradient(values, x, step, vectorized=True)


def check_instance(loss, x, labels=None, alpha=45.0, margin=losses.DEFAULT_MARGIN,
                   lam=losses.DEFAULT_LAMBDA, step=1e-5):
    """Relative error of one instance, or ``None`` when it sits near a kink."""
    if loss == "triplet":
        _, arg = ref_triplet_values(x[None], margin)
        if abs(arg[0]) < KINK_GUARD:
            return None
        analytic = losses.triplet_loss(Triplet(*x), margin).gradients
        numeric = _fd(lambda S: ref_triplet_values(S, margin)[0], x, step)
    elif loss == "angular":
        _, arg = ref_angular_values(x[None], alpha)
        if abs(arg[0]) < KINK_GUARD:
            return None
        analytic = losses.angular_loss(Triplet(*x), alpha).gradients
        numeric = _fd(lambda S: ref_angular_values(S, alpha)[0], x, step)
    else:
        batch = NPairBatch.from_arrays(x, labels)
        if loss == "triplet-npair":
            _, args = ref_triplet_batch_values(x[None], labels, margin)
            if np.min(np.abs(args)) < KINK_GUARD:
                return None
            analytic = losses.triplet_loss_batch(batch, margin).gradients
            numeric = _fd(lambda S: ref_triplet_batch_values(S, labels, margin)[0], x, step)
        elif loss == "npair":
            analytic = losses.npair_loss_batch(batch).gradients
            numeric = _fd(lambda S: ref_npair_values(S, labels), x, step)
        elif loss == "angular-batch":
            analytic = losses.angular_loss_batch(batch, alpha).gradients
            numeric = _fd(lambda S: ref_angular_batch_values(S, labels, alpha), x, step)
        elif loss == "npair-angular":
            analytic = losses.combined_loss_batch(batch, alpha, lam).gradients
            numeric = _fd(lambda S: ref_combined_values(S, labels, alpha, lam), x, step)
        else:
            raise InvalidInputError(f"unknown loss {loss!r}")
    return losses.relative_gradient_error(analytic, numeric, floor=GRAD_FLOOR)


def random_instance(loss, dim, rng, batch_size=8):
    """Unit-scale random inputs: N(0, I / dim) rows."""
    scale = 1.0 / np.sqrt(dim)
    if loss in SINGLE_LOSSES:
        return rng.standard_normal((3, dim)) * scale, None
    labels = np.repeat(np.arange(batch_size // 2), 2)
    return rng.standard_normal((batch_size, dim)) * scale, labels


def run_grad_check(loss, trials=1000, dim=8, tol=1e-5, seed=0, batch_size=8,
                   alpha=None, margin=losses.DEFAULT_MARGIN, lam=losses.DEFAULT_LAMBDA, step=1e-5):
    """Check ``trials`` random instances; ``alpha=None`` draws it per trial from [20, 60]."""
    if loss not in CHECKABLE:
        raise InvalidInputError(f"unknown loss {loss!r}; choose from {', '.join(CHECKABLE)}")
    if trials < 1:
        raise InvalidInputError("trials must be >= 1")
    rng = make_rng(seed)
    worst = 0.0
    checked = skipped = 0
    for _ in range(trials):
        x, labels = random_instance(loss, dim, rng, batch_size)
        a = float(rng.uniform(20.0, 60.0)) if alpha is None else alpha
        err = check_instance(loss, x, labels, a, margin, lam, step)
        if err is None:
            skipped += 1
            continue
        checked += 1
        worst = max(worst, err)
    return GradCheckSummary(loss, trials, dim, checked, skipped, worst, tol)
