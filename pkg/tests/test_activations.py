import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from poolcert.activations import (activation_fn, adaptive_relu_relax, relax_layer,
                                  relu_relax, sshape_relax)

S_KINDS = ("sigmoid", "tanh", "arctan")


def sigmoid(x):
    return 1.0 / (1.0 + np.exp(-np.asarray(x, dtype=np.float64)))


class TestReluRelax:
    def test_unstable_interval(self):
        row = relu_relax(-1.0, 2.0)
        assert row.a_u[0] == pytest.approx(2 / 3)
        assert row.b_u == pytest.approx(2 / 3)
        assert row.a_l[0] == 1.0  # u > |l|
        assert row.b_l == 0.0

    def test_wholly_positive_is_identity(self):
        row = relu_relax(1.0, 3.0)
        assert (row.a_l[0], row.b_l, row.a_u[0], row.b_u) == (1.0, 0.0, 1.0, 0.0)

    def test_wholly_negative_is_zero(self):
        row = relu_relax(-3.0, -1.0)
        assert (row.a_l[0], row.b_l, row.a_u[0], row.b_u) == (0.0, 0.0, 0.0, 0.0)

    def test_tie_resolves_to_flat_lower(self):
        row = relu_relax(-1.0, 1.0)
        assert row.a_u[0] == pytest.approx(0.5)
        assert row.b_u == pytest.approx(0.5)
        assert row.a_l[0] == 0.0  # u == |l| goes flat

    def test_upper_is_chord_through_endpoints(self, rng):
        for _ in range(200):
            l = float(rng.uniform(-5, -1e-3))
            u = float(rng.uniform(1e-3, 5))
            row = relu_relax(l, u)
            assert row.upper_at(np.array([l])) == pytest.approx(0.0, abs=1e-12)
            assert row.upper_at(np.array([u])) == pytest.approx(u, abs=1e-12)

    def test_continuity_toward_stable_positive(self):
        # as l -> 0- the unstable upper slope approaches the identity slope
        for l in (-1e-3, -1e-6, -1e-9):
            assert relu_relax(l, 2.0).a_u[0] == pytest.approx(1.0, abs=1e-2)
        assert relu_relax(-1e-12, 2.0).a_u[0] == pytest.approx(1.0, abs=1e-9)

    def test_invalid_interval(self):
        with pytest.raises(ValueError):
            relu_relax(1.0, 0.0)


class TestAdaptiveRelu:
    def test_zero_slope(self):
        row = adaptive_relu_relax(-2.0, 2.0, 0.0)
        assert row.a_l[0] == 0.0 and row.b_l == 0.0

    def test_unit_slope(self):
        row = adaptive_relu_relax(-2.0, 2.0, 1.0)
        assert row.a_l[0] == 1.0 and row.b_l == 0.0

    def test_fractional_slope(self):
        row = adaptive_relu_relax(-1.0, 3.0, 0.25)
        assert row.a_u[0] == pytest.approx(0.75)
        assert row.b_u == pytest.approx(0.75)
        assert row.a_l[0] == 0.25

    def test_stable_cases_ignore_slope(self):
        assert adaptive_relu_relax(1.0, 2.0, 0.3).a_l[0] == 1.0
        assert adaptive_relu_relax(-2.0, -1.0, 0.3).a_u[0] == 0.0

    def test_slope_out_of_range(self):
        with pytest.raises(ValueError):
            adaptive_relu_relax(-1.0, 1.0, 1.5)


class TestSShapeRelax:
    def test_point_interval_is_constant(self):
        row = sshape_relax("sigmoid", 0.0, 0.0)
        assert row.a_l[0] == row.a_u[0] == 0.0
        assert row.b_l == row.b_u == pytest.approx(0.5)

    def test_tanh_concave_region(self):
        """On [1, 2] tanh is concave: tangent at 1.5 above, chord below."""
        row = sshape_relax("tanh", 1.0, 2.0)
        slope = 1.0 - math.tanh(1.5) ** 2
        assert row.a_u[0] == pytest.approx(slope, abs=1e-12)
        assert row.upper_at(np.array([1.5])) == pytest.approx(math.tanh(1.5), abs=1e-12)
        chord = (math.tanh(2.0) - math.tanh(1.0)) / 1.0
        assert row.a_l[0] == pytest.approx(chord, abs=1e-12)
        assert row.lower_at(np.array([1.0])) == pytest.approx(math.tanh(1.0), abs=1e-12)

    def test_sigmoid_spanning_interval(self):
        """On [-3, 3] both bounds carry the chord slope; the upper line is
        tangent on the positive side and sound on a dense grid."""
        row = sshape_relax("sigmoid", -3.0, 3.0)
        chord = float(sigmoid(3.0) - sigmoid(-3.0)) / 6.0
        assert row.a_u[0] == pytest.approx(chord, abs=1e-12)
        assert row.a_l[0] == pytest.approx(chord, abs=1e-12)
        xs = np.linspace(-3.0, 3.0, 10_000)
        fx = sigmoid(xs)
        assert np.all(row.a_u[0] * xs + row.b_u >= fx - 1e-9)
        assert np.all(row.a_l[0] * xs + row.b_l <= fx + 1e-9)
        # tangency: the upper line touches the curve somewhere
        assert np.min(row.a_u[0] * xs + row.b_u - fx) < 1e-6

    def test_convex_region_mirrors(self):
        row = sshape_relax("arctan", -2.0, -0.5)
        chord = (math.atan(-0.5) - math.atan(-2.0)) / 1.5
        assert row.a_u[0] == pytest.approx(chord, abs=1e-12)
        m = -1.25
        assert row.a_l[0] == pytest.approx(1.0 / (1.0 + m * m), abs=1e-12)

    def test_rejects_non_sshaped(self):
        with pytest.raises(ValueError):
            sshape_relax("relu", -1.0, 1.0)

    @pytest.mark.parametrize("kind", S_KINDS)
    def test_grid_soundness_random_intervals(self, kind, rng):
        """1000 random intervals per kind, each checked on a 10^4 grid."""
        f = activation_fn(kind)
        xs01 = np.linspace(0.0, 1.0, 10_000)
        for _ in range(1000):
            a, b = rng.uniform(-8, 8, size=2)
            l, u = (a, b) if a <= b else (b, a)
            row = sshape_relax(kind, float(l), float(u))
            xs = l + (u - l) * xs01
            fx = f(xs)
            assert np.all(row.a_u[0] * xs + row.b_u >= fx - 1e-9), (kind, l, u)
            assert np.all(row.a_l[0] * xs + row.b_l <= fx + 1e-9), (kind, l, u)


@given(st.floats(-50, 50), st.floats(-50, 50), st.sampled_from(S_KINDS))
@settings(max_examples=300, deadline=None)
def test_sshape_soundness_hypothesis(a, b, kind):
    l, u = min(a, b), max(a, b)
    row = sshape_relax(kind, l, u)
    f = activation_fn(kind)
    xs = np.linspace(l, u, 257)
    fx = f(xs)
    assert np.all(row.a_u[0] * xs + row.b_u >= fx - 1e-9)
    assert np.all(row.a_l[0] * xs + row.b_l <= fx + 1e-9)


@given(st.floats(-50, 50), st.floats(-50, 50),
       st.floats(0, 1, allow_nan=False))
@settings(max_examples=300, deadline=None)
def test_relu_family_soundness_hypothesis(a, b, slope):
    l, u = min(a, b), max(a, b)
    xs = np.linspace(l, u, 257)
    fx = np.maximum(xs, 0.0)
    for row in (relu_relax(l, u), adaptive_relu_relax(l, u, slope)):
        assert np.all(row.a_u[0] * xs + row.b_u >= fx - 1e-9)
        assert np.all(row.a_l[0] * xs + row.b_l <= fx + 1e-9)


class TestRelaxLayer:
    def test_matches_scalar_calls(self, rng):
        lower = rng.uniform(-3, 0, size=6)
        upper = lower + rng.uniform(0, 3, size=6)
        a_l, b_l, a_u, b_u = relax_layer("sigmoid", lower, upper)
        for i in range(6):
            row = sshape_relax("sigmoid", lower[i], upper[i])
            assert a_l[i] == row.a_l[0] and b_l[i] == row.b_l
            assert a_u[i] == row.a_u[0] and b_u[i] == row.b_u

    def test_adaptive_needs_slope(self):
        with pytest.raises(ValueError):
            relax_layer("adaptive_relu", np.array([-1.0]), np.array([1.0]), None)

    def test_forward_of_adaptive_is_relu(self):
        f = activation_fn("adaptive_relu")
        np.testing.assert_array_equal(f(np.array([-1.0, 2.0])), [0.0, 2.0])
