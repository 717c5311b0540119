import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from angular_metric.errors import InvalidInputError, SamplingError
from angular_metric.sampling import (
    LabeledDataset,
    NPairBatch,
    make_rng,
    sample_disjoint_triplet_indices,
    sample_disjoint_triplets,
    sample_npair_batch,
)


def blobs(classes, per_class, dim=3, seed=0):
    rng = np.random.default_rng(seed)
    labels = np.repeat(np.arange(classes), per_class)
    return LabeledDataset(rng.standard_normal((labels.size, dim)), labels)


class TestLabeledDataset:
    def test_class_index(self):
        d = LabeledDataset(np.zeros((4, 2)), [3, 1, 3, 1])
        assert d.class_index == {3: [0, 2], 1: [1, 3]}
        assert d.classes == [1, 3]
        assert len(d) == 4 and d.dim == 2

    @pytest.mark.parametrize("vectors,labels", [
        (np.zeros((3, 2)), [0, 1]),
        (np.zeros(3), [0, 1, 2]),
        (np.zeros((2, 2)), [0, -1]),
        (np.zeros((2, 2)), [0.5, 1.0]),
        (np.array([[0.0, np.inf], [1, 1]]), [0, 1]),
    ])
    def test_rejects(self, vectors, labels):
        with pytest.raises(InvalidInputError):
            LabeledDataset(vectors, labels)

    def test_subset(self):
        d = blobs(3, 2)
        s = d.subset([5, 0])
        np.testing.assert_array_equal(s.labels, [2, 0])
        np.testing.assert_array_equal(s.vectors[0], d.vectors[5])


class TestNPairBatchValidation:
    X = np.arange(8.0).reshape(4, 2)

    def test_valid(self):
        b = NPairBatch([(0, 1), (2, 3)], self.X, [0, 0, 1, 1])
        np.testing.assert_array_equal(b.partner, [1, 0, 3, 2])

    @pytest.mark.parametrize("pairs,labels,rows", [
        ([(0, 1), (2, 3)], [0, 1, 1, 1], 4),   # pair labels differ
        ([(0, 1), (2, 3)], [0, 0, 0, 0], 4),   # two pairs of one class
        ([(0, 0), (2, 3)], [0, 0, 1, 1], 4),   # repeated dataset position
        ([(0, 1)], [0, 0], 2),                 # too small
    ])
    def test_invalid(self, pairs, labels, rows):
        with pytest.raises(InvalidInputError):
            NPairBatch(pairs, self.X[:rows], labels)

    def test_tuplet_expansion(self):
        b = sample_npair_batch(blobs(10, 3), 12, 4)
        tuplets = list(b.tuplets())
        assert len(tuplets) == 12
        for a, p, negs in tuplets:
            assert b.labels[a] == b.labels[p] and a != p
            assert negs.size == 10
            assert not np.any(b.labels[negs] == b.labels[a])


class TestDisjointTriplets:
    def test_two_by_two(self):
        d = LabeledDataset(np.eye(4), [0, 0, 1, 1])
        (t,), idx = sample_disjoint_triplet_indices(d, 1, 3)
        a, p, n = idx[0]
        assert d.labels[a] == d.labels[p] != d.labels[n]
        assert a != p
        np.testing.assert_array_equal(t.anchor, d.vectors[a])

    def test_single_class(self):
        with pytest.raises(SamplingError):
            sample_disjoint_triplets(blobs(1, 5), 1, 0)

    def test_no_class_with_two_samples(self):
        with pytest.raises(SamplingError):
            sample_disjoint_triplets(LabeledDataset(np.eye(3), [0, 1, 2]), 1, 0)

    def test_singleton_classes_only_as_negative(self):
        d = LabeledDataset(np.eye(4), [0, 0, 1, 2])
        _, idx = sample_disjoint_triplet_indices(d, 200, 1)
        assert np.all(d.labels[idx[:, 0]] == 0)
        assert set(d.labels[idx[:, 2]].tolist()) == {1, 2}

    def test_count(self):
        with pytest.raises(InvalidInputError):
            sample_disjoint_triplets(blobs(2, 2), 0, 0)

    def test_deterministic(self):
        d = blobs(5, 4)
        _, i1 = sample_disjoint_triplet_indices(d, 50, 9)
        _, i2 = sample_disjoint_triplet_indices(d, 50, 9)
        np.testing.assert_array_equal(i1, i2)


class TestNPairSampling:
    def test_paper_batch_size(self):
        b = sample_npair_batch(blobs(64, 2, dim=2), 128, 0)
        assert b.size == 128
        assert np.unique(b.labels).size == 64

    def test_odd(self):
        with pytest.raises(InvalidInputError):
            sample_npair_batch(blobs(5, 2), 3, 0)

    def test_too_few_classes(self):
        with pytest.raises(SamplingError):
            sample_npair_batch(blobs(3, 4), 8, 0)

    def test_ineligible_classes_ignored(self):
        d = LabeledDataset(np.eye(5), [0, 0, 1, 1, 2])
        b = sample_npair_batch(d, 4, 2)
        assert sorted(set(b.labels.tolist())) == [0, 1]
        with pytest.raises(SamplingError):
            sample_npair_batch(d, 6, 2)

    def test_rows_follow_positions(self):
        d = blobs(6, 5)
        b = sample_npair_batch(d, 8, 11)
        flat = np.array(b.pairs).reshape(-1)
        np.testing.assert_array_equal(b.vectors, d.vectors[flat])
        np.testing.assert_array_equal(b.labels, d.labels[flat])

    def test_deterministic(self):
        d = blobs(8, 4)
        b1, b2 = sample_npair_batch(d, 10, 5), sample_npair_batch(d, 10, 5)
        assert b1.pairs == b2.pairs

    def test_generator_is_consumed(self):
        d = blobs(8, 4)
        rng = make_rng(5)
        assert sample_npair_batch(d, 10, rng).pairs != sample_npair_batch(d, 10, rng).pairs

    def test_coverage(self):
        d = blobs(12, 3)
        seen = np.zeros(12, dtype=int)
        for seed in range(300):
            seen[np.unique(sample_npair_batch(d, 8, seed).labels)] += 1
        assert np.all(seen > 0)
        # each class should appear in about a third of the batches
        assert np.all(np.abs(seen / 300 - 4 / 12) < 0.12)

    @settings(max_examples=100, deadline=None)
    @given(st.integers(2, 12), st.integers(2, 5), st.integers(0, 2**31), st.data())
    def test_always_valid(self, classes, per_class, seed, data):
        n = 2 * data.draw(st.integers(2, classes)) if classes >= 2 else 4
        b = sample_npair_batch(blobs(classes, per_class), n, seed)
        b.validate()
        for a, p in b.pairs:
            assert a != p
