import math

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from angular_metric.errors import InvalidInputError
from angular_metric.geometry import (
    Triplet,
    angular_constraint_satisfied,
    positive_center,
    triangle_geometry,
    triplet_constraint_satisfied,
)


def random_rotation(rng, d):
    q, r = np.linalg.qr(rng.standard_normal((d, d)))
    return q * np.sign(np.diag(r))


coords = st.floats(-10, 10, allow_nan=False, allow_infinity=False)


@st.composite
def triplets(draw, dim=None):
    d = dim or draw(st.integers(2, 6))
    pts = [draw(st.lists(coords, min_size=d, max_size=d)) for _ in range(3)]
    return Triplet(*pts)


class TestPositiveCenter:
    def test_midpoint(self):
        np.testing.assert_array_equal(positive_center([1, 0], [0, 1]), [0.5, 0.5])

    def test_identity(self):
        u = np.array([0.3, -2.0, 7.5])
        np.testing.assert_array_equal(positive_center(u, u), u)

    def test_symmetric(self):
        np.testing.assert_array_equal(positive_center([1, 0], [-1, 0]), [0, 0])

    def test_dimension_mismatch(self):
        with pytest.raises(InvalidInputError):
            positive_center([1, 0], [1, 0, 0])


class TestTriangleGeometry:
    def test_example_orthogonal(self):
        g = triangle_geometry(Triplet([1, 0], [0, 1], [-1, 0]))
        np.testing.assert_allclose(g.center, [0.5, 0.5])
        assert g.radius == pytest.approx(math.sqrt(2) / 2, abs=1e-12)
        assert g.negative_to_center_dist == pytest.approx(math.sqrt(2.5), abs=1e-12)
        assert g.tan_angle_n_prime == pytest.approx(0.44721, abs=5e-6)

    def test_example_45_degrees(self):
        g = triangle_geometry(Triplet([1, 0], [-1, 0], [0, 1]))
        np.testing.assert_array_equal(g.center, [0, 0])
        assert g.radius == 1.0
        assert g.negative_to_center_dist == 1.0
        assert g.tan_angle_n_prime == 1.0
        assert g.angle_n_prime_degrees == pytest.approx(45.0)

    def test_zero_radius(self):
        g = triangle_geometry(Triplet([1, 0], [1, 0], [3, -2]))
        assert g.radius == 0.0
        assert g.tan_angle_n_prime == 0.0

    def test_negative_on_center_is_infinite(self):
        g = triangle_geometry(Triplet([1, 0], [-1, 0], [0, 0]))
        assert g.tan_angle_n_prime == math.inf

    def test_all_coincide(self):
        g = triangle_geometry(Triplet([1, 1], [1, 1], [1, 1]))
        assert g.tan_angle_n_prime == 0.0

    def test_rejects_bad_triplets(self):
        with pytest.raises(InvalidInputError):
            Triplet([1, 0], [0, 1], [0, 1, 2])
        with pytest.raises(InvalidInputError):
            Triplet([1, np.nan], [0, 1], [0, 1])
        with pytest.raises(InvalidInputError):
            Triplet([], [], [])

    def test_tan_matches_explicit_reconstruction(self, rng):
        # Build x_m on the circle, perpendicular to e_nc at x_c, and measure the angle.
        for _ in range(500):
            d = int(rng.integers(2, 9))
            a, p, n = rng.standard_normal((3, d))
            g = triangle_geometry(Triplet(a, p, n))
            e_nc = n - g.center
            v = rng.standard_normal(d)
            v -= v @ e_nc / (e_nc @ e_nc) * e_nc
            x_m = g.center + g.radius * v / np.linalg.norm(v)
            u1, u2 = g.center - n, x_m - n
            cos = u1 @ u2 / (np.linalg.norm(u1) * np.linalg.norm(u2))
            angle = math.acos(min(1.0, cos))
            assert g.tan_angle_n_prime == pytest.approx(math.tan(angle), rel=1e-9)
            # the arctangent path of the same ratio
            assert g.tan_angle_n_prime == pytest.approx(
                math.tan(math.atan2(g.radius, g.negative_to_center_dist)), rel=1e-12)


class TestTripletConstraint:
    t = Triplet([1, 0], [0, 1], [-1, 0])

    def test_satisfied(self):
        assert triplet_constraint_satisfied(self.t, 0.1)

    def test_violated(self):
        assert not triplet_constraint_satisfied(self.t, 3.0)

    def test_zero_positive_distance(self):
        assert triplet_constraint_satisfied(Triplet([2, 2], [2, 2], [0, 1]), 0.0)

    def test_negative_margin(self):
        with pytest.raises(InvalidInputError):
            triplet_constraint_satisfied(self.t, -0.1)


class TestAngularConstraint:
    t = Triplet([1, 0], [-1, 0], [0, 1])

    def test_boundary_45(self):
        assert angular_constraint_satisfied(self.t, 45)

    def test_violated_36(self):
        assert not angular_constraint_satisfied(self.t, 36)

    def test_zero_width(self):
        t = Triplet([1, 0], [1, 0], [5, 5])
        for alpha in (0.5, 10, 45, 89.9):
            assert angular_constraint_satisfied(t, alpha)

    def test_negative_on_center_violated(self):
        assert not angular_constraint_satisfied(Triplet([1, 0], [-1, 0], [0, 0]), 89.0)

    @pytest.mark.parametrize("alpha", [0, -5, 90, 120])
    def test_alpha_range(self, alpha):
        with pytest.raises(InvalidInputError):
            angular_constraint_satisfied(self.t, alpha)

    @settings(max_examples=200, deadline=None)
    @given(triplets(), st.floats(1, 89), st.floats(1, 89))
    def test_monotone_in_alpha(self, t, a1, a2):
        lo, hi = min(a1, a2), max(a1, a2)
        if angular_constraint_satisfied(t, lo):
            assert angular_constraint_satisfied(t, hi)

    @settings(max_examples=200, deadline=None)
    @given(triplets(dim=3), st.floats(1, 89), st.integers(0, 2**32 - 1),
           st.floats(0.01, 100), st.lists(coords, min_size=3, max_size=3))
    def test_similarity_invariance(self, t, alpha, seed, scale, shift):
        g = triangle_geometry(t)
        # keep clear of the decision boundary, where rounding may flip the answer
        assume(g.negative_to_center_dist > 1e-6)
        assume(abs(math.degrees(math.atan2(g.radius, g.negative_to_center_dist)) - alpha) > 1e-6)
        q = random_rotation(np.random.default_rng(seed), 3)
        moved = t.transformed(q, shift, scale)
        assert angular_constraint_satisfied(moved, alpha) == angular_constraint_satisfied(t, alpha)
        assert triangle_geometry(moved).tan_angle_n_prime == pytest.approx(g.tan_angle_n_prime,
                                                                           rel=1e-6, abs=1e-9)
