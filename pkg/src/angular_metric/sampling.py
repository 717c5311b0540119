"""Mini-batch construction: disjoint triplets and N-pair tuplet batches.

Randomness comes from numpy's ``PCG64`` bit generator seeded with an
explicit integer; its output stream is specified and stable across
platforms, so a given ``(dataset, n, seed)`` always yields the same batch.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidInputError, SamplingError
from .geometry import Triplet


def make_rng(seed):
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.Generator(np.random.PCG64(int(seed)))


@dataclass
class LabeledDataset:
    vectors: np.ndarray
    labels: np.ndarray
    class_index: dict = field(init=False, repr=False)

    def __post_init__(self):
        X = np.asarray(self.vectors, dtype=np.float64)
        y = np.asarray(self.labels)
        if X.ndim != 2 or X.shape[1] == 0:
            raise InvalidInputError(f"vectors must be a 2-d array with D >= 1, got shape {X.shape}")
        if y.shape != (X.shape[0],):
            raise InvalidInputError("need exactly one label per vector")
        if y.size and (not np.issubdtype(y.dtype, np.integer) or y.min() < 0):
            raise InvalidInputError("labels must be nonnegative integers")
        if not np.all(np.isfinite(X)):
            raise InvalidInputError("vectors have non-finite components")
        self.vectors = X
        self.labels = y.astype(np.int64)
        index = {}
        for pos, lab in enumerate(self.labels.tolist()):
            index.setdefault(lab, []).append(pos)
        self.class_index = index

    def __len__(self):
        return self.vectors.shape[0]

    @property
    def dim(self):
        return self.vectors.shape[1]

    @property
    def classes(self):
        return sorted(self.class_index)

    def subset(self, positions):
        positions = np.asarray(positions, dtype=np.int64)
        return LabeledDataset(self.vectors[positions], self.labels[positions])

    def with_vectors(self, vectors):
        return LabeledDataset(vectors, self.labels)


@dataclass
class NPairBatch:
    """``N/2`` same-class pairs from ``N/2`` distinct classes.

    Rows ``2k`` and ``2k + 1`` of ``vectors`` hold pair ``k``; ``pairs`` keeps
    the originating dataset positions.
    """

    pairs: list
    vectors: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        self.vectors = np.asarray(self.vectors, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        self.pairs = [tuple(int(i) for i in p) for p in self.pairs]
        self.validate()

    def validate(self):
        n = self.vectors.shape[0]
        if self.vectors.ndim != 2:
            raise InvalidInputError("batch vectors must be 2-d")
        if n < 4 or n % 2:
            raise InvalidInputError(f"an N-pair batch needs an even N >= 4, got {n}")
        if self.labels.shape != (n,) or len(self.pairs) != n // 2:
            raise InvalidInputError("labels/pairs do not match the number of vectors")
        if not np.all(np.isfinite(self.vectors)):
            raise InvalidInputError("batch vectors have non-finite components")
        first, second = self.labels[0::2], self.labels[1::2]
        if np.any(first != second):
            raise InvalidInputError("each pair must share a label")
        if np.unique(first).size != first.size:
            raise InvalidInputError("pair labels must be pairwise distinct")
        if any(a == p for a, p in self.pairs):
            raise InvalidInputError("a pair must use two distinct dataset positions")

    @property
    def size(self):
        return self.vectors.shape[0]

    @property
    def partner(self):
        return np.arange(self.size) ^ 1

    def with_vectors(self, vectors):
        return NPairBatch(self.pairs, vectors, self.labels)

    def tuplets(self):
        """Yield ``(anchor, positive, negatives)`` row indices, one per sample."""
        partner = self.partner
        for a in range(self.size):
            negs = np.flatnonzero(self.labels != self.labels[a])
            yield a, int(partner[a]), negs

    @classmethod
    def from_arrays(cls, vectors, labels):
        """Build from row-paired arrays when dataset positions are irrelevant."""
        n = len(vectors)
        return cls([(i, i + 1) for i in range(0, n, 2)], vectors, labels)


def sample_disjoint_triplets(data: LabeledDataset, count, rng_seed):
    """Draw ``count`` independent triplets with ``y_a == y_p != y_n``.

    Anchor class is uniform over classes with at least two samples; the
    negative class is uniform over the remaining classes.
    """
    if count < 1:
        raise InvalidInputError("count must be positive")
    triplets, _ = sample_disjoint_triplet_indices(data, count, rng_seed)
    return triplets


def sample_disjoint_triplet_indices(data: LabeledDataset, count, rng_seed):
    """Like :func:`sample_disjoint_triplets` but also returns the (count, 3) positions."""
    rng = make_rng(rng_seed)
    classes = data.classes
    eligible = [c for c in classes if len(data.class_index[c]) >= 2]
    if len(classes) < 2 or not eligible:
        raise SamplingError("need >= 2 classes and at least one class with >= 2 samples")
    idx = np.empty((count, 3), dtype=np.int64)
    for t in range(count):
        ca = eligible[rng.integers(len(eligible))]
        a, p = rng.choice(data.class_index[ca], size=2, replace=False)
        others = [c for c in classes if c != ca]
        cn = others[rng.integers(len(others))]
        members = data.class_index[cn]
        idx[t] = (a, p, members[rng.integers(len(members))])
    X = data.vectors
    return [Triplet(X[a], X[p], X[n]) for a, p, n in idx], idx


def sample_npair_batch(data: LabeledDataset, n, rng_seed) -> NPairBatch:
    if n % 2 or n < 4:
        raise InvalidInputError(f"N must be even and >= 4, got {n}")
    rng = make_rng(rng_seed)
    eligible = [c for c in data.classes if len(data.class_index[c]) >= 2]
    if len(eligible) < n // 2:
        raise SamplingError(f"N={n} needs {n // 2} classes with >= 2 samples, dataset has {len(eligible)}")
    chosen = rng.choice(len(eligible), size=n // 2, replace=False)
    pairs = []
    for ci in chosen:
        members = data.class_index[eligible[ci]]
        a, p = rng.choice(len(members), size=2, replace=False)
        pairs.append((members[a], members[p]))
    flat = np.array(pairs, dtype=np.int64).reshape(-1)
    return NPairBatch(pairs, data.vectors[flat], data.labels[flat])
