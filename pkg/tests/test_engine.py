from fractions import Fraction as F

import numpy as np
import pytest

from regen_srs import (
    DiscreteCdf,
    StateGrid,
    best_splitting_point,
    contraction_profile,
    coupled_pair,
    embedded_matrix,
    embedded_samples,
    estimate_limit_distribution,
    estimate_splitting,
    identity_map,
    iid_driver,
    limiting_mu,
    reset_map,
    simulate,
    splitting_exact,
    stationary,
    uniform_distance,
)
from regen_srs.engine import (
    calibrate_burn_in,
    coupled_ensemble,
    default_burn_in,
    effective_sample_size,
    ensemble_distance,
    long_run_distribution,
    sweep_splitting,
)
from regen_srs.errors import ValidationError
from regen_srs.fixtures import EXAMPLE4_P, example4_driver, example4_grid, example4_map

GRID = StateGrid([0.0, 1.0, 2.0, 3.0])


@pytest.fixture(scope="module")
def fd():
    return example4_map(), example4_driver("float")


class TestSimulate:
    def test_identity_constant(self, fd):
        tr = simulate(identity_map(), fd[1], 1.5, 200, seed=3)
        assert np.all(tr.states == 1.5)

    def test_hand_unroll(self, fd):
        f, d = fd
        tr = simulate(f, d, 0, 10, seed=11)
        x = 0.0
        for t, v in enumerate(tr.shocks):
            x = min(3.0, max(0.0, x + v))
            assert tr.states[t + 1] == x

    def test_reset_follows_shocks(self):
        d = iid_driver([(0.0, 0.3), (1.0, 0.7)])
        tr = simulate(reset_map(), d, 0.5, 100, seed=2)
        assert np.array_equal(tr.states[1:], tr.shocks)

    def test_regenerations_match_cycles(self, fd):
        tr = simulate(*fd, 0, 500, seed=4)
        gaps = np.diff(tr.regenerations)
        assert set(gaps.tolist()) <= {2, 3}
        # every cycle is (2, 1) or (2, 2, 1): label 1 closes each cycle
        d = fd[1]
        for end in tr.regenerations[1:]:
            assert d.labels[tr.env[end - 1]] == 1
        assert tr.cycle_of(int(tr.regenerations[3])) == 3
        assert tr.age(int(tr.regenerations[3]) + 1) == 1

    def test_prefix_property(self, fd):
        long = simulate(*fd, 0, 5000, seed=8)
        short = simulate(*fd, 0, 100, seed=8)
        assert np.array_equal(long.states[:101], short.states)
        assert np.array_equal(long.shocks[:100], short.shocks)

    def test_streams_differ(self, fd):
        a = simulate(*fd, 0, 200, seed=8, stream=0)
        b = simulate(*fd, 0, 200, seed=8, stream=1)
        assert not np.array_equal(a.shocks, b.shocks)

    def test_replay_csv(self, fd):
        a = simulate(*fd, 0, 300, seed=5).to_csv()
        b = simulate(*fd, 0, 300, seed=5).to_csv()
        assert a == b

    def test_start_outside_interval(self, fd):
        with pytest.raises(ValidationError):
            simulate(*fd, 7, 10, seed=0)


class TestCoupling:
    def test_identity_stays_apart(self, fd):
        run = coupled_pair(identity_map(), fd[1], 50, seed=1, interval=(0.0, 3.0))
        assert np.all(run.top.states == 3) and np.all(run.bottom.states == 0)
        assert run.coalescence_time() is None

    def test_reset_coalesces(self):
        d = iid_driver([(0.0, 0.5), (1.0, 0.5)])
        run = coupled_pair(reset_map(), d, 10, seed=1, interval=(0.0, 1.0))
        assert run.coalescence_time() == 1

    def test_order_many_runs(self, fd):
        bad = sum(coupled_pair(*fd, 40, seed=s).order_violations() for s in range(2000))
        assert bad == 0

    def test_ensemble_order(self, fd):
        X = coupled_ensemble(*fd, [0.0, 1.0, 3.0], 30, 5000, seed=2)
        assert np.all(X[0] <= X[1]) and np.all(X[1] <= X[2])


class TestEmbedded:
    def test_identity(self, fd):
        ys = embedded_samples(identity_map(), fd[1], 2.0, 100, seed=0)
        assert np.all(ys == 2.0)

    def test_row_three_frequencies(self, fd):
        f, d = fd
        # one cycle from 3, repeated on fresh streams
        ys = np.array([embedded_samples(f, d, 3, 1, seed=9, stream=s)[1] for s in range(2000)])
        counts = np.bincount(ys.astype(int), minlength=4) / len(ys)
        n = len(ys)
        for j, p in enumerate(EXAMPLE4_P[3]):
            p = float(p)
            assert abs(counts[j] - p) <= 4 * np.sqrt(p * (1 - p) / n)

    def test_reset_law(self):
        d = iid_driver([(0.0, 0.25), (1.0, 0.75)])
        ys = embedded_samples(reset_map(), d, 0.0, 100_000, seed=1)[1:]
        assert abs(ys.mean() - 0.75) < 4 * np.sqrt(0.75 * 0.25 / len(ys))

    def test_stationary_frequencies(self, fd):
        ys = embedded_samples(*fd, 0, 200_000, seed=12)
        emp = DiscreteCdf.empirical(ys, grid=GRID)
        pi = stationary(embedded_matrix(example4_map(), example4_driver(), example4_grid())).as_cdf().to_float()
        assert uniform_distance(emp, pi) < 0.01


class TestLimit:
    def test_identity_point_mass(self, fd):
        est = estimate_limit_distribution(identity_map(), fd[1], 10, 1000, seed=0, x0=2.0, interval=(0.0, 3.0))
        assert est.cdf(1.9) == 0 and est.cdf(2.0) == 1

    def test_reset_uniform(self):
        vals = [(float(k), 0.25) for k in range(4)]
        est = estimate_limit_distribution(reset_map(), iid_driver(vals), 0, 200_000, seed=3,
                                          interval=(0.0, 3.0))
        uni = DiscreteCdf(GRID, [0.25] * 4)
        assert uniform_distance(est.cdf, uni) < 0.005

    def test_example4_mu(self, fd):
        f, d, g = example4_map(), example4_driver(), example4_grid()
        mu = limiting_mu(f, d, g, stationary(embedded_matrix(f, d, g))).to_float()
        est = estimate_limit_distribution(*fd, 100, 200_000, seed=21, grid=GRID)
        assert uniform_distance(est.cdf, mu) < 0.01
        assert 0 < est.ess <= est.samples

    def test_long_run_matches_single_chain(self, fd):
        f, d, g = example4_map(), example4_driver(), example4_grid()
        mu = limiting_mu(f, d, g, stationary(embedded_matrix(f, d, g))).to_float()
        est = long_run_distribution(*fd, 3.0, 100, 2000, seed=1, chains=64)
        assert uniform_distance(est.cdf, mu) < 0.01


def test_effective_sample_size():
    rng = np.random.default_rng(0)
    iid = rng.standard_normal(20_000)
    assert effective_sample_size(iid) == pytest.approx(20_000, rel=0.1)
    ar = np.zeros(20_000)
    for t in range(1, len(ar)):
        ar[t] = 0.9 * ar[t - 1] + iid[t]
    # AR(1): n (1 - rho) / (1 + rho)
    assert effective_sample_size(ar) == pytest.approx(20_000 * 0.1 / 1.9, rel=0.3)


class TestSplitting:
    def test_reset_point_mass(self):
        d = iid_driver([(1.0, 1.0)])
        est = estimate_splitting(reset_map(), d, 1.0, 1000, seed=0, interval=(0.0, 2.0))
        assert est.eps1 == 1 and est.eps2 == 1

    def test_identity_never_descends(self, fd):
        est = estimate_splitting(identity_map(), fd[1], 1.0, 1000, seed=0, interval=(0.0, 3.0))
        assert est.eps1 == 0

    def test_example4_within_four_se(self, fd):
        f, d, g = example4_map(), example4_driver(), example4_grid()
        c, e1, e2 = best_splitting_point(f, d, g)
        est = estimate_splitting(*fd, float(c), 200_000, seed=5)
        assert abs(est.eps1 - float(e1)) <= 4 * est.se1
        assert abs(est.eps2 - float(e2)) <= 4 * est.se2

    def test_sweep_picks_best(self, fd):
        best, results = sweep_splitting(*fd, [0.0, 1.0, 2.0, 3.0], 100_000, seed=6)
        assert best.c == 2.0
        f, d, g = example4_map(), example4_driver(), example4_grid()
        for r in results:
            e1, e2 = splitting_exact(f, d, g, F(int(r.c)))
            assert abs(r.eps1 - float(e1)) <= 4 * r.se1 + 1e-12
            assert abs(r.eps2 - float(e2)) <= 4 * r.se2 + 1e-12

    def test_streams_deterministic(self, fd):
        a = estimate_splitting(*fd, 2.0, 10_000, seed=1, streams=3)
        b = estimate_splitting(*fd, 2.0, 10_000, seed=1, streams=3)
        assert a == b


class TestContraction:
    def test_reset(self):
        d = iid_driver([(0.0, 0.5), (1.0, 0.5)])
        prof = contraction_profile(reset_map(), d, 3, seed=0, replications=2000, interval=(0.0, 1.0))
        assert prof.d[0] == 0

    def test_identity(self, fd):
        prof = contraction_profile(identity_map(), fd[1], 4, seed=0, replications=500, interval=(0.0, 3.0))
        assert np.all(prof.d == 1)

    def test_example4_bound(self, fd):
        prof = contraction_profile(*fd, 10, seed=3, se_bound=0.01)
        assert prof.replications == 2500
        for k in range(10):
            assert prof.d[k] <= 0.5 ** (k + 1) + 3 * max(prof.se[k], 0.01)

    def test_uncoupled(self, fd):
        prof = contraction_profile(*fd, 5, seed=3, replications=20_000, coupled=False)
        exact = [(7 / 32) ** k for k in range(1, 6)]
        for k in range(5):
            assert abs(prof.d[k] - exact[k]) <= 4 * prof.se[k] + 0.02


class TestBurnIn:
    def test_default(self):
        d = example4_driver()
        # (1/2)^k < 0.01 first at k = 7; 10 * 5/2 * 7
        assert default_burn_in(d, 0.5) == 175

    def test_rejects_zero_eps(self):
        with pytest.raises(ValidationError):
            default_burn_in(example4_driver(), 0.0)

    def test_calibration(self, fd):
        bi = calibrate_burn_in(*fd, seed=0)
        assert bi.cycles_per_block == 1 and bi.eps >= 0.05
        assert bi.steps == default_burn_in(fd[1], bi.eps)

    def test_ensemble_distance(self, fd):
        d_common, _, _ = ensemble_distance(*fd, [0.0, 3.0], 200, 4000, seed=1, common=True)
        assert d_common == 0
        d_ind, _, _ = ensemble_distance(*fd, [0.0, 3.0], 200, 20_000, seed=1)
        assert d_ind < 0.03
