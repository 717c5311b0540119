"""Hot inner loops, each in a numba-loop form and a vectorized numpy form.

The loop forms are compiled by :func:`._accel.njit`; callers go through the
dispatchers at the bottom, which consult ``_accel.USE_NUMBA`` per call so the
backend can be flipped at runtime (tests and the benchmark rely on that).
Both forms reduce in a fixed order, so each is deterministic run to run.
"""

import math

import numpy as np

from . import _accel
from ._accel import njit

# ---------------------------------------------------------------------------
# log-sum-exp over N-pair tuplets
#
# For anchor i with partner p and negative j the logit is
#     s = c_an * x_i.x_j + c_pn * x_p.x_j + c_ap * x_i.x_p
# and the anchor contributes log(1 + sum_j exp(s)).  N-pair loss is
# (1, 0, -1); the batch angular loss is (4t^2, 4t^2, -2(1 + t^2)).
# ---------------------------------------------------------------------------


@njit
def _tuplet_lse_loop(X, partner, labels, c_an, c_pn, c_ap):
    # gradient = coef @ X, with coef accumulated per (anchor, negative)
    n = X.shape[0]
    G = X @ X.T
    coef = np.zeros((n, n))
    terms = np.zeros(n)
    s = np.empty(n)
    for i in range(n):
        p = partner[i]
        m = 0.0
        for j in range(n):
            if labels[j] == labels[i]:
                continue
            s[j] = c_an * G[i, j] + c_pn * G[p, j] + c_ap * G[i, p]
            if s[j] > m:
                m = s[j]
        z = math.exp(-m)
        for j in range(n):
            if labels[j] != labels[i]:
                z += math.exp(s[j] - m)
        lse = m + math.log(z)
        terms[i] = lse
        for j in range(n):
            if labels[j] == labels[i]:
                continue
            w = math.exp(s[j] - lse)
            coef[i, j] += w * c_an
            coef[i, p] += w * c_ap
            coef[p, j] += w * c_pn
            coef[p, i] += w * c_ap
            coef[j, i] += w * c_an
            coef[j, p] += w * c_pn
    return terms, (coef @ X) / n


def _tuplet_lse_numpy(X, partner, labels, c_an, c_pn, c_ap):
    n = X.shape[0]
    Xp = X[partner]
    S = c_an * (X @ X.T) + c_pn * (Xp @ X.T) + c_ap * np.sum(X * Xp, axis=1)[:, None]
    neg = labels[:, None] != labels[None, :]
    S = np.where(neg, S, -np.inf)
    m = np.maximum(S.max(axis=1), 0.0)
    lse = m + np.log(np.exp(-m) + np.exp(S - m[:, None]).sum(axis=1))
    W = np.exp(S - lse[:, None])
    wsum = W.sum(axis=1)[:, None]
    grad = c_an * (W @ X) + c_ap * wsum * Xp
    np.add.at(grad, partner, c_pn * (W @ X) + c_ap * wsum * X)
    grad += W.T @ (c_an * X + c_pn * Xp)
    return lse, grad / n


# ---------------------------------------------------------------------------
# triplet hinge over every (anchor, partner, negative) tuplet of a batch
# ---------------------------------------------------------------------------


@njit
def _tuplet_hinge_loop(X, partner, labels, margin):
    n = X.shape[0]
    G = X @ X.T
    coef = np.zeros((n, n))
    total = 0.0
    count = 0
    for i in range(n):
        p = partner[i]
        d_ap = G[i, i] + G[p, p] - 2.0 * G[i, p]
        for j in range(n):
            if labels[j] == labels[i]:
                continue
            count += 1
            arg = d_ap - (G[i, i] + G[j, j] - 2.0 * G[i, j]) + margin
            if arg > 0.0:
                total += arg
                # 2(x_j - x_p) to i, 2(x_p - x_i) to p, 2(x_i - x_j) to j
                coef[i, j] += 2.0
                coef[i, p] -= 2.0
                coef[p, p] += 2.0
                coef[p, i] -= 2.0
                coef[j, i] += 2.0
                coef[j, j] -= 2.0
    return total / count, (coef @ X) / count


def _tuplet_hinge_numpy(X, partner, labels, margin):
    Xp = X[partner]
    d_ap = np.sum((X - Xp) ** 2, axis=1)
    d_an = np.sum((X[:, None, :] - X[None, :, :]) ** 2, axis=2)
    neg = labels[:, None] != labels[None, :]
    arg = d_ap[:, None] - d_an + margin
    A = (neg & (arg > 0.0)).astype(np.float64)
    count = int(neg.sum())
    value = float(np.sum(np.where(A > 0, arg, 0.0)))
    asum = A.sum(axis=1)[:, None]
    grad = 2.0 * (A @ X - asum * Xp)
    np.add.at(grad, partner, 2.0 * asum * (Xp - X))
    grad += 2.0 * (A.sum(axis=0)[:, None] * (-X) + A.T @ X)
    return value / count, grad / count


# ---------------------------------------------------------------------------
# nearest-neighbour rank of the first same-class hit
#
# Neighbours are ordered by (squared distance, index).  The rank of the
# closest same-label sample b is 1 + #{j != q : (d_j, j) < (d_b, b)}; query q
# counts for Recall@R iff that rank <= R.  Returns 0 when no same-label
# sample exists.
# ---------------------------------------------------------------------------


@njit
def _first_hit_rank_loop(X, labels):
    n, d = X.shape
    ranks = np.zeros(n, dtype=np.int64)
    dist = np.empty(n)
    for q in range(n):
        best = -1
        for j in range(n):
            if j == q:
                continue
            acc = 0.0
            for k in range(d):
                diff = X[q, k] - X[j, k]
                acc += diff * diff
            dist[j] = acc
            if labels[j] == labels[q] and (best < 0 or acc < dist[best]):
                best = j
        if best < 0:
            continue
        r = 1
        db = dist[best]
        for j in range(n):
            if j == q or j == best:
                continue
            if dist[j] < db or (dist[j] == db and j < best):
                r += 1
        ranks[q] = r
    return ranks


def _first_hit_rank_numpy(X, labels, block=128):
    n = X.shape[0]
    ranks = np.zeros(n, dtype=np.int64)
    idx = np.arange(n)
    for start in range(0, n, block):
        q = idx[start:start + block]
        D = np.sum((X[q, None, :] - X[None, :, :]) ** 2, axis=2)
        D[np.arange(q.size), q] = np.inf
        same = labels[q, None] == labels[None, :]
        same[np.arange(q.size), q] = False
        has = same.any(axis=1)
        Ds = np.where(same, D, np.inf)
        # argmin returns the lowest index among equal minima
        best = np.argmin(Ds, axis=1)
        db = Ds[np.arange(q.size), best]
        before = (D < db[:, None]) | ((D == db[:, None]) & (idx[None, :] < best[:, None]))
        before[np.arange(q.size), q] = False
        ranks[q] = np.where(has, 1 + before.sum(axis=1), 0)
    return ranks


# ---------------------------------------------------------------------------
# Lloyd iterations
# ---------------------------------------------------------------------------


@njit
def _lloyd_loop(X, centers, max_iter, tol):
    n, d = X.shape
    k = centers.shape[0]
    C = centers.copy()
    assign = np.zeros(n, dtype=np.int64)
    mind = np.empty(n)
    for it in range(max_iter):
        for i in range(n):
            bj = 0
            bd = np.inf
            for c in range(k):
                acc = 0.0
                for t in range(d):
                    diff = X[i, t] - C[c, t]
                    acc += diff * diff
                if acc < bd:
                    bd = acc
                    bj = c
            assign[i] = bj
            mind[i] = bd
        sums = np.zeros((k, d))
        counts = np.zeros(k, dtype=np.int64)
        for i in range(n):
            counts[assign[i]] += 1
            for t in range(d):
                sums[assign[i], t] += X[i, t]
        newC = np.empty((k, d))
        taken = np.zeros(n, dtype=np.bool_)
        for c in range(k):
            if counts[c] > 0:
                for t in range(d):
                    newC[c, t] = sums[c, t] / counts[c]
            else:
                # re-seed an empty cluster at the worst-fit point
                far = -1
                for i in range(n):
                    if not taken[i] and (far < 0 or mind[i] > mind[far]):
                        far = i
                taken[far] = True
                for t in range(d):
                    newC[c, t] = X[far, t]
        shift = 0.0
        for c in range(k):
            acc = 0.0
            for t in range(d):
                diff = newC[c, t] - C[c, t]
                acc += diff * diff
            if acc > shift:
                shift = acc
        C = newC
        if math.sqrt(shift) < tol:
            break
    inertia = 0.0
    for i in range(n):
        bj = 0
        bd = np.inf
        for c in range(k):
            acc = 0.0
            for t in range(d):
                diff = X[i, t] - C[c, t]
                acc += diff * diff
            if acc < bd:
                bd = acc
                bj = c
        assign[i] = bj
        inertia += bd
    return assign, C, inertia


def _assign_numpy(X, C):
    D = np.sum((X[:, None, :] - C[None, :, :]) ** 2, axis=2)
    a = np.argmin(D, axis=1)
    return a, D[np.arange(X.shape[0]), a]


def _lloyd_numpy(X, centers, max_iter, tol):
    n, d = X.shape
    k = centers.shape[0]
    C = centers.copy()
    for _ in range(max_iter):
        assign, mind = _assign_numpy(X, C)
        counts = np.bincount(assign, minlength=k)
        sums = np.zeros((k, d))
        np.add.at(sums, assign, X)
        newC = np.empty((k, d))
        full = counts > 0
        newC[full] = sums[full] / counts[full, None]
        if not full.all():
            # stable sort keeps the lowest index first among equal distances
            order = np.argsort(-mind, kind="stable")
            newC[~full] = X[order[: int((~full).sum())]]
        shift = np.sqrt(np.max(np.sum((newC - C) ** 2, axis=1)))
        C = newC
        if shift < tol:
            break
    assign, mind = _assign_numpy(X, C)
    return assign, C, float(mind.sum())


# ---------------------------------------------------------------------------
# dispatch
# ---------------------------------------------------------------------------


def _c(X):
    return np.ascontiguousarray(X, dtype=np.float64)


def tuplet_lse(X, partner, labels, c_an, c_pn, c_ap):
    """Per-anchor log-sum-exp terms and the gradient of their mean."""
    args = (_c(X), np.asarray(partner, np.int64), np.asarray(labels, np.int64),
            float(c_an), float(c_pn), float(c_ap))
    if _accel.USE_NUMBA:
        return _tuplet_lse_loop(*args)
    return _tuplet_lse_numpy(*args)


def tuplet_hinge(X, partner, labels, margin):
    args = (_c(X), np.asarray(partner, np.int64), np.asarray(labels, np.int64), float(margin))
    if _accel.USE_NUMBA:
        return _tuplet_hinge_loop(*args)
    return _tuplet_hinge_numpy(*args)


def first_hit_rank(X, labels):
    args = (_c(X), np.asarray(labels, np.int64))
    if _accel.USE_NUMBA:
        return _first_hit_rank_loop(*args)
    return _first_hit_rank_numpy(*args)


def lloyd(X, centers, max_iter=300, tol=1e-6):
    args = (_c(X), _c(centers), int(max_iter), float(tol))
    if _accel.USE_NUMBA:
        return _lloyd_loop(*args)
    return _lloyd_numpy(*args)
