from fractions import Fraction as F

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from regen_srs import (
    DiscreteCdf,
    MonotoneMap,
    StateGrid,
    clamp_add_map,
    identity_map,
    pushforward,
    stochastic_dominance,
    uniform_distance,
    verify_monotone,
)
from regen_srs.errors import DomainMismatchError, ValidationError
from regen_srs.ordered import verify_range

GRID4 = StateGrid([0, 1, 2, 3])


def dense_sup(F1, F2, lo, hi, n=20001):
    # oracle: evaluate both CDFs on a fine mesh that contains every jump point
    xs = np.union1d(np.linspace(lo, hi, n), np.concatenate([F1.points, F2.points]).astype(float))
    return max(abs(F1(x) - F2(x)) for x in xs)


class TestStateGrid:
    def test_requires_increasing(self):
        with pytest.raises(ValidationError):
            StateGrid([0, 2, 1])
        with pytest.raises(ValidationError):
            StateGrid([1])

    def test_bottom_top(self):
        g = StateGrid([F(1, 2), 1, 3], "rational")
        assert g.bottom == F(1, 2) and g.top == 3
        assert g.index(1) == 1

    def test_unit_rescaling(self):
        g = StateGrid([2.0, 4.0, 6.0])
        assert g.to_unit(4.0) == pytest.approx(0.5)
        assert g.from_unit(0.25) == pytest.approx(3.0)


class TestDiscreteCdf:
    def test_rejects_bad_mass(self):
        with pytest.raises(ValidationError):
            DiscreteCdf(GRID4, [0.5, 0.5, 0.5, -0.5])
        with pytest.raises(ValidationError):
            DiscreteCdf(StateGrid([0, 1], "rational"), [F(1, 3), F(1, 3)])

    def test_right_continuous(self):
        Fd = DiscreteCdf(GRID4, [0.1, 0.2, 0.3, 0.4])
        assert Fd(0.999) == pytest.approx(0.1)
        assert Fd(1) == pytest.approx(0.3)
        assert Fd(-1) == 0
        assert Fd(10) == 1

    def test_rational_cdf_exact(self):
        g = StateGrid([0, 1, 2], "rational")
        Fd = DiscreteCdf(g, [F(1, 3), F(1, 6), F(1, 2)])
        assert Fd(1) == F(1, 2)

    def test_csv_round_trip_float(self):
        Fd = DiscreteCdf(StateGrid([0.0, 0.1, 1 / 3]), [0.2, 0.3, 0.5])
        back = DiscreteCdf.from_csv(Fd.to_csv())
        assert np.array_equal(back.points, Fd.points)
        assert np.array_equal(back.mass, Fd.mass)

    def test_csv_round_trip_rational(self):
        g = StateGrid([0, F(1, 2), 3], "rational")
        Fd = DiscreteCdf(g, [F(1, 7), F(2, 7), F(4, 7)])
        back = DiscreteCdf.from_csv(Fd.to_csv())
        assert back.backend == "rational"
        assert list(back.mass) == list(Fd.mass)

    def test_empirical_on_grid(self):
        Fd = DiscreteCdf.empirical([0, 0, 1, 3], grid=GRID4)
        assert list(Fd.mass) == [0.5, 0.25, 0.0, 0.25]
        with pytest.raises(ValidationError):
            DiscreteCdf.empirical([0.5], grid=GRID4)


class TestUniformDistance:
    def test_identity_and_extremes(self):
        Fd = DiscreteCdf(GRID4, [0.1, 0.2, 0.3, 0.4])
        assert uniform_distance(Fd, Fd) == 0
        bottom = DiscreteCdf.point_mass(GRID4, 0)
        top = DiscreteCdf.point_mass(GRID4, 3)
        assert uniform_distance(bottom, top) == 1

    def test_matches_dense_oracle(self):
        A = DiscreteCdf(GRID4, [0.1, 0.4, 0.1, 0.4])
        B = DiscreteCdf(GRID4, [0.3, 0.1, 0.5, 0.1])
        assert uniform_distance(A, B) == pytest.approx(dense_sup(A, B, 0, 3), abs=1e-15)

    def test_different_grids_same_interval(self):
        A = DiscreteCdf(StateGrid([0.0, 0.5, 1.0]), [0.2, 0.6, 0.2])
        B = DiscreteCdf(StateGrid([0.0, 0.25, 0.75, 1.0]), [0.1, 0.3, 0.3, 0.3])
        assert uniform_distance(A, B) == pytest.approx(dense_sup(A, B, 0, 1), abs=1e-15)

    def test_rational_exact(self):
        g = StateGrid([0, 1], "rational")
        d = uniform_distance(DiscreteCdf(g, [F(1, 3), F(2, 3)]), DiscreteCdf(g, [F(1, 2), F(1, 2)]))
        assert d == F(1, 6)

    def test_mismatched_interval(self):
        A = DiscreteCdf(StateGrid([0.0, 1.0]), [0.5, 0.5])
        B = DiscreteCdf(StateGrid([0.0, 2.0]), [0.5, 0.5])
        with pytest.raises(DomainMismatchError):
            uniform_distance(A, B)


class TestDominance:
    def test_point_masses(self):
        bottom = DiscreteCdf.point_mass(GRID4, 0)
        top = DiscreteCdf.point_mass(GRID4, 3)
        assert stochastic_dominance(bottom, top)
        assert stochastic_dominance(bottom, bottom)

    def test_crossing(self):
        g = StateGrid([0, 1, 2])
        A = DiscreteCdf(g, [0.5, 0.0, 0.5])
        B = DiscreteCdf(g, [0.0, 1.0, 0.0])
        # exhaustive jump-point scan: A(0) > B(0) but A(1) < B(1)
        assert not stochastic_dominance(A, B)
        assert not stochastic_dominance(B, A)


class TestMonotoneMaps:
    def test_identity(self):
        assert verify_monotone(identity_map(), GRID4, [0, 1]) == []

    def test_clamp_add(self):
        assert verify_monotone(clamp_add_map(0, 3), GRID4, [-2, -1, 0, 1, 2, 3]) == []
        assert verify_range(clamp_add_map(0, 3), GRID4, [-2, 3]) == []

    def test_reversed(self):
        neg = MonotoneMap(lambda x, v: -x)
        report = verify_monotone(neg, GRID4, [0])
        assert [(w.x1, w.x2) for w in report] == [(0, 1), (1, 2), (2, 3)]

    def test_empty_shocks(self):
        with pytest.raises(ValidationError):
            verify_monotone(identity_map(), GRID4, [])

    def test_pushforward_exact(self):
        g = StateGrid([0, 1, 2, 3], "rational")
        Fd = DiscreteCdf(g, [F(1, 4)] * 4)
        out = pushforward(Fd, clamp_add_map(0, 3), -2)
        assert out(0) == F(3, 4) and out(1) == 1


prob_vec = st.lists(st.integers(0, 20), min_size=5, max_size=5).filter(lambda v: sum(v) > 0)
GRID5 = StateGrid([0.0, 0.5, 1.0, 2.0, 3.0])


def to_cdf(w):
    w = np.asarray(w, dtype=float)
    return DiscreteCdf(GRID5, w / w.sum())


@settings(max_examples=1000, deadline=None)
@given(prob_vec, prob_vec, prob_vec)
def test_metric_axioms(a, b, c):
    A, B, C = to_cdf(a), to_cdf(b), to_cdf(c)
    dab = uniform_distance(A, B)
    assert 0 <= dab <= 1
    assert dab == uniform_distance(B, A)
    assert uniform_distance(A, A) == 0
    assert (dab == 0) == bool(np.allclose(A.mass, B.mass, atol=1e-15))
    assert dab <= uniform_distance(A, C) + uniform_distance(C, B) + 1e-15


@settings(max_examples=300, deadline=None)
@given(prob_vec, prob_vec, st.floats(-3, 3, allow_nan=False))
def test_pushforward_preserves_order(a, b, v):
    A, B = to_cdf(a), to_cdf(b)
    lo, hi = (A, B) if stochastic_dominance(A, B) else (B, A)
    if not stochastic_dominance(lo, hi):
        return
    f = clamp_add_map(0.0, 3.0)
    assert stochastic_dominance(pushforward(lo, f, v), pushforward(hi, f, v))
