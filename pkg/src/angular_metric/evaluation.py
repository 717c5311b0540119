"""Retrieval and clustering quality of an embedding.

Recall@R counts queries whose R nearest neighbours (squared Euclidean,
ties broken by ascending index, the query itself excluded) contain a
same-class sample.  Clustering quality runs k-means and scores the result
with NMI (arithmetic-mean normalization) and pairwise F1.
"""

from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .errors import InvalidInputError
from .sampling import LabeledDataset, make_rng

KMEANS_RESTARTS = 10
KMEANS_MAX_ITER = 300
KMEANS_TOL = 1e-6


@dataclass
class MetricReport:
    recall_at: dict
    nmi: float
    f1: float
    k_used: int
    num_queries: int
    unit_norm: bool = False
    extra: dict = field(default_factory=dict)

    def lines(self):
        out = [f"# queries={self.num_queries} k={self.k_used} unit_norm={int(self.unit_norm)}"]
        for r in sorted(self.recall_at):
            out.append(f"recall@{r}\t{self.recall_at[r]:.6f}")
        out.append(f"nmi\t{self.nmi:.6f}")
        out.append(f"f1\t{self.f1:.6f}")
        return out

    def format(self):
        return "\n".join(self.lines()) + "\n"


def parse_report(text):
    """Inverse of :meth:`MetricReport.format` for the metric lines (comments skipped)."""
    values = {}
    for line in text.splitlines():
        if not line.strip() or line.startswith("#"):
            continue
        name, value = line.split("\t")
        values[name] = float(value)
    return values


def split_by_class(data: LabeledDataset, train_fraction=0.5, seed=0, shuffle=True):
    """Partition the classes (not the samples) into train and test sides.

    ``round(train_fraction * K)`` classes go to training.  With
    ``shuffle=False`` the lowest labels are used for training.
    """
    classes = np.array(data.classes)
    if classes.size < 2:
        raise InvalidInputError("need at least 2 classes to split")
    n_train = int(round(train_fraction * classes.size))
    if not 0 < n_train < classes.size:
        raise InvalidInputError(f"train_fraction={train_fraction} leaves one side empty")
    if shuffle:
        classes = classes[make_rng(seed).permutation(classes.size)]
    train_mask = np.isin(data.labels, classes[:n_train])
    return data.subset(np.flatnonzero(train_mask)), data.subset(np.flatnonzero(~train_mask))


def _check_embeddings(embeddings, labels):
    X = np.asarray(embeddings, dtype=np.float64)
    y = np.asarray(labels)
    if X.ndim != 2 or y.shape != (X.shape[0],):
        raise InvalidInputError("need a 2-d embedding array and one label per row")
    return X, y


def first_hit_ranks(embeddings, labels):
    """1-based neighbour rank of each query's nearest same-class sample (0 if none)."""
    X, y = _check_embeddings(embeddings, labels)
    _, codes = np.unique(y, return_inverse=True)
    return _kernels.first_hit_rank(X, codes)


def recall_at_r(embeddings, labels, r_values=(1, 2, 4, 8)):
    X, y = _check_embeddings(embeddings, labels)
    n = X.shape[0]
    if n < 2:
        raise InvalidInputError("need at least 2 samples")
    r_values = [int(r) for r in r_values]
    for r in r_values:
        if r <= 0 or r >= n:
            raise InvalidInputError(f"R must satisfy 0 < R < {n}, got {r}")
    ranks = first_hit_ranks(X, y)
    hit = ranks > 0
    return {r: float(np.count_nonzero(hit & (ranks <= r))) / n for r in r_values}


def _kmeanspp(X, k, rng):
    n = X.shape[0]
    chosen = [int(rng.integers(n))]
    d2 = np.sum((X - X[chosen[0]]) ** 2, axis=1)
    for _ in range(1, k):
        total = d2.sum()
        if total > 0.0:
            nxt = int(rng.choice(n, p=d2 / total))
        else:
            # every point already coincides with a center
            free = np.setdiff1d(np.arange(n), chosen)
            nxt = int(free[rng.integers(free.size)])
        chosen.append(nxt)
        d2 = np.minimum(d2, np.sum((X - X[nxt]) ** 2, axis=1))
    return X[chosen].copy()


def kmeans(embeddings, k, seed=0, restarts=KMEANS_RESTARTS, max_iter=KMEANS_MAX_ITER, tol=KMEANS_TOL):
    """Best-of-``restarts`` Lloyd k-means from k-means++ seeds.

    Returns ``(assignments, inertia)``.  Restart ``i`` uses the ``i``-th child
    of ``SeedSequence(seed)``; ties in inertia keep the earliest restart.
    """
    X = np.asarray(embeddings, dtype=np.float64)
    k = int(k)
    if k <= 0:
        raise InvalidInputError(f"k must be positive, got {k}")
    if k > X.shape[0]:
        raise InvalidInputError(f"k={k} exceeds the number of samples {X.shape[0]}")
    best = None
    for child in np.random.SeedSequence(int(seed)).spawn(restarts):
        rng = np.random.Generator(np.random.PCG64(child))
        centers = _kmeanspp(X, k, rng)
        assign, _, inertia = _kernels.lloyd(X, centers, max_iter, tol)
        if best is None or inertia < best[1]:
            best = (np.asarray(assign, dtype=np.int64), float(inertia))
    return best


def _contingency(predicted, truth):
    predicted = np.asarray(predicted)
    truth = np.asarray(truth)
    if predicted.shape != truth.shape or predicted.ndim != 1:
        raise InvalidInputError("predicted and truth must be 1-d and equally long")
    _, pi = np.unique(predicted, return_inverse=True)
    _, ti = np.unique(truth, return_inverse=True)
    table = np.zeros((pi.max(initial=-1) + 1, ti.max(initial=-1) + 1), dtype=np.int64)
    np.add.at(table, (pi, ti), 1)
    return table


def _entropy(counts, n):
    p = counts[counts > 0] / n
    return float(-np.sum(p * np.log(p)))


def nmi(predicted, truth):
    table = _contingency(predicted, truth)
    n = table.sum()
    if n == 0:
        raise InvalidInputError("need at least one sample")
    rows, cols = table.sum(axis=1), table.sum(axis=0)
    h_pred, h_true = _entropy(rows, n), _entropy(cols, n)
    if h_pred == 0.0 and h_true == 0.0:
        return 1.0
    nz = table > 0
    pij = table[nz] / n
    outer = (rows[:, None] * cols[None, :])[nz] / (n * n)
    mi = float(np.sum(pij * np.log(pij / outer)))
    return float(min(max(mi / (0.5 * (h_pred + h_true)), 0.0), 1.0))


def _pairs(c):
    c = np.asarray(c, dtype=np.int64)
    return int(np.sum(c * (c - 1) // 2))


def pairwise_f1(predicted, truth):
    table = _contingency(predicted, truth)
    if table.sum() < 2:
        raise InvalidInputError("need at least 2 samples")
    tp = _pairs(table)
    pred_pos = _pairs(table.sum(axis=1))
    true_pos = _pairs(table.sum(axis=0))
    precision = tp / pred_pos if pred_pos else 0.0
    recall = tp / true_pos if true_pos else 0.0
    if precision + recall == 0.0:
        return 0.0
    return 2.0 * precision * recall / (precision + recall)


def evaluate(embeddings, labels, r_values=(1, 2, 4, 8), k=None, seed=0):
    X, y = _check_embeddings(embeddings, labels)
    k_used = int(np.unique(y).size) if k is None else int(k)
    recall = recall_at_r(X, y, r_values)
    assign, _ = kmeans(X, k_used, seed)
    unit = bool(np.all(np.abs(np.linalg.norm(X, axis=1) - 1.0) <= 1e-9))
    return MetricReport(recall, nmi(assign, y), pairwise_f1(assign, y), k_used, X.shape[0], unit)
