"""Acceptance suite: one test per criterion, each reporting a PASS/FAIL line.

Run ``pytest tests/test_acceptance.py -v``; the lines are repeated in the
"acceptance criteria" section of the terminal summary.
"""
import json
import time
from fractions import Fraction as F
from importlib.resources import files

import numpy as np

from regen_srs import (
    DiscreteCdf,
    StateGrid,
    best_splitting_point,
    contraction_profile,
    coupled_pair,
    embedded_matrix,
    embedded_samples,
    estimate_limit_distribution,
    limiting_mu,
    markov_atom_driver,
    pushforward,
    simulate,
    stationary,
    stochastic_dominance,
    uniform_distance,
)
from regen_srs.cli import main
from regen_srs.engine import calibrate_burn_in, default_burn_in, long_run_distribution
from regen_srs.fixtures import (
    example4_driver,
    example4_grid,
    example4_map,
    first_best_fixture,
    risk_sharing_fixture,
)
from regen_srs.models import (
    closed_form_policy,
    compile_to_srs,
    growth_interval,
    huggett_bounds,
    lemma_descent_scan,
    risk_sharing_map,
)
from regen_srs.ordered import clamp_add_map
from regen_srs.rng import make_rng

P_ROWS = [["1/4"] * 4, ["1/4"] * 4, ["3/16", "1/4", "1/4", "5/16"], ["3/32", "3/16", "1/4", "15/32"]]
SRS_SPEC = str(files("regen_srs") / "data" / "example4_srs.json")
PI = [F(29, 160), F(183, 800), F(1, 4), F(17, 50)]


def _exact_mu():
    f, d, g = example4_map(), example4_driver(), example4_grid()
    return limiting_mu(f, d, g, stationary(embedded_matrix(f, d, g)))


def _fractions(pairs):
    return [F(p, q) for p, q in pairs]


def test_1_example4_exact(tmp_path, acceptance):
    t0 = time.perf_counter()
    code = main(["reproduce", "example4", "--out", str(tmp_path)])
    elapsed = time.perf_counter() - t0
    P = [[F(*x) for x in row] for row in json.loads((tmp_path / "P.json").read_text())["matrix"]]
    pi = _fractions(json.loads((tmp_path / "pi.json").read_text())["pi"])
    mu = _fractions(json.loads((tmp_path / "mu.json").read_text())["mu"])
    ok = (code == 0
          and P == [[F(x) for x in row] for row in P_ROWS]
          and pi == PI
          and mu[3] == F(2, 5) * pi[3]
          and mu[2] == F(2, 5) * (pi[2] + pi[3] / 2)
          and mu[1] == F(2, 5) * (pi[1] + pi[2] / 2 + F(5, 8) * pi[3])
          and sum(mu) == 1
          and elapsed < 1.0)
    assert acceptance("1 Example 4 exact P, pi, mu (rational) in < 1 s", ok, f"{elapsed:.3f} s")


def test_2_monte_carlo_consistency(acceptance):
    f, d = example4_map(), example4_driver("float")
    grid = StateGrid([0.0, 1.0, 2.0, 3.0])
    pi = DiscreteCdf(grid, [float(p) for p in PI])
    mu = _exact_mu().to_float()

    t0 = time.perf_counter()
    ys = embedded_samples(f, d, 0, 1_000_000, seed=2024)
    t_pi = time.perf_counter() - t0
    d_pi = uniform_distance(DiscreteCdf.empirical(ys[1:], grid=grid), pi)

    t0 = time.perf_counter()
    burn = default_burn_in(d, 0.5)
    est = estimate_limit_distribution(f, d, burn, 1_000_000, seed=2025, grid=grid)
    t_mu = time.perf_counter() - t0
    d_mu = uniform_distance(est.cdf, mu)

    ok = d_pi <= 0.005 and d_mu <= 0.005 and t_pi < 60 and t_mu < 60
    assert acceptance("2 Monte Carlo pi and mu within 0.005 at 10^6, < 60 s each", ok,
                      f"d_pi={d_pi:.4f} ({t_pi:.1f} s), d_mu={d_mu:.4f} ({t_mu:.1f} s)")


def test_3_geometric_contraction(acceptance):
    f, dr, g = example4_map(), example4_driver(), example4_grid()
    _, e1, e2 = best_splitting_point(f, dr, g)
    eps = float(min(e1, e2))
    prof = contraction_profile(f, example4_driver("float"), 50, seed=33, se_bound=0.01)
    k = np.arange(1, 51)
    bound = (1 - eps) ** k + 4 * prof.se
    # binomial worst case sqrt(1/4 / R) caps every CDF standard error
    se_cap = float(np.sqrt(0.25 / prof.replications))
    ok = bool(np.all(prof.d <= bound)) and se_cap <= 0.01 and float(np.max(prof.se)) <= 0.01
    worst = float(np.max(prof.d - (1 - eps) ** k))
    assert acceptance("3 d_k <= (1-eps)^k + 4 SE for k <= 50", ok,
                      f"eps={eps}, R={prof.replications}, max(d_k-(1-eps)^k)={worst:.4f}")


def _violations(fmap, driver, runs, horizon, interval=None):
    return sum(coupled_pair(fmap, driver, horizon, seed=s, interval=interval).order_violations()
               for s in range(runs))


def test_4_coupling_order(huggett_solution, growth_solution, acceptance):
    counts = {"example4": _violations(example4_map(), example4_driver("float"), 10_000, 60)}
    for name, sol in (("huggett", huggett_solution), ("growth", growth_solution)):
        fmap, driver, _ = compile_to_srs(sol)
        counts[name] = _violations(fmap, driver, 10_000, 60)
    rs = risk_sharing_map(risk_sharing_fixture())
    counts["risksharing"] = _violations(rs.fmap, rs.driver, 10_000, 60)
    ok = all(v == 0 for v in counts.values())
    assert acceptance("4 zero order violations over 10^4 coupled runs per system", ok,
                      ", ".join(f"{k}={v}" for k, v in counts.items()))


def test_5_growth_closed_form(growth_solution, acceptance):
    sol = growth_solution
    K, Z = np.meshgrid(sol.grid, sol.spec.shocks, indexing="ij")
    err = float(np.max(np.abs(sol.policy - closed_form_policy(sol.spec, K, Z))))
    euler = float(np.nanmax(np.abs(sol.euler)))
    gi = growth_interval(sol)
    ok = len(sol.grid) == 500 and err < 1e-3 and euler < 1e-4 and gi.lemma_failures == []
    assert acceptance("5 growth policy vs closed form, Euler residuals, descent scan above k'", ok,
                      f"sup err={err:.2e}, euler={euler:.2e}, k'={gi.k_prime:.4f}, k''={gi.k_double_prime:.4f}")


def test_6_huggett_structure(huggett_solution, acceptance):
    t0 = time.perf_counter()
    sol = huggett_solution
    scan = lemma_descent_scan(sol)
    b = huggett_bounds(sol)
    on_grid = bool(np.any(sol.grid == b.a_bar)) and b.a_bar < sol.grid[-1]
    fmap, driver, grid = compile_to_srs(sol)
    bi = calibrate_burn_in(fmap, driver, seed=6)
    starts = [float(grid.bottom), b.a_bar]
    laws = [long_run_distribution(fmap, driver, x0, bi.steps, 40_000, seed=6, stream=s + 1)
            for s, x0 in enumerate(starts)]
    dist = uniform_distance(laws[0].cdf, laws[1].cdf)
    elapsed = time.perf_counter() - t0
    ok = scan == [] and on_grid and dist <= 0.01 and elapsed < 300
    assert acceptance("6 Huggett descent scan, a_bar on grid, limits from a_lower and a_bar within 0.01", ok,
                      f"a_bar={b.a_bar:.4f}, burn-in={bi.steps}, d={dist:.4f}, {elapsed:.0f} s")


def test_7_risk_sharing(acceptance):
    rs = risk_sharing_map(risk_sharing_fixture())
    bi = calibrate_burn_in(rs.fmap, rs.driver, seed=7)
    a, b = (long_run_distribution(rs.fmap, rs.driver, x0, bi.steps, 20_000, seed=7, stream=s + 1)
            for s, x0 in enumerate([rs.c_min, rs.c_max]))
    d_unique = uniform_distance(a.cdf, b.cdf)

    fb = risk_sharing_map(first_best_fixture())
    starts = [float(fb.lo.min()), float(fb.hi.max())]
    settled = []
    finals = []
    for x0 in starts:
        for seed in range(20):
            tr = simulate(fb.fmap, fb.driver, x0, 400, seed=seed)
            tail = tr.states[200:]
            settled.append(bool(np.all(tail == tail[0])))
            finals.append((x0, tail[0]))
    lows = {v for x0, v in finals if x0 == starts[0]}
    highs = {v for x0, v in finals if x0 == starts[1]}
    la, lb = (long_run_distribution(fb.fmap, fb.driver, x0, 200, 2000, seed=7, stream=s + 1, chains=64)
              for s, x0 in enumerate(starts))
    d_fb = uniform_distance(la.cdf, lb.cdf)
    ok = (not rs.first_best and d_unique <= 0.01 and fb.first_best and all(settled)
          and max(lows) < min(highs) and d_fb > 0.5)
    assert acceptance("7 risk sharing: unique limit when disjoint; frozen, start-dependent limits at first best",
                      ok, f"d(c_min, c_max)={d_unique:.4f}, first-best d={d_fb:.3f}")


def test_8_property_suites(tmp_path, acceptance):
    rng = np.random.default_rng(8)
    grid = StateGrid(np.sort(rng.uniform(0, 1, 6)).tolist() + [1.5])

    def random_cdf():
        w = rng.exponential(size=len(grid)) * (rng.random(len(grid)) < 0.7)
        w[rng.integers(len(grid))] += 0.1
        return DiscreteCdf(grid, w / w.sum())

    metric_ok = True
    for _ in range(1000):
        A, B, C = random_cdf(), random_cdf(), random_cdf()
        dab = uniform_distance(A, B)
        metric_ok &= (0 <= dab <= 1 and dab == uniform_distance(B, A) and uniform_distance(A, A) == 0
                      and dab <= uniform_distance(A, C) + uniform_distance(C, B) + 1e-15
                      and (dab > 0 or np.allclose(A.mass, B.mass)))

    # F <= G in first-order dominance: G moves part of F's mass one node up
    push_ok = True
    f = clamp_add_map(0.0, 1.5)
    for _ in range(300):
        Fl = random_cdf()
        shift = Fl.mass * rng.random(len(grid))
        shift[-1] = 0.0
        Gm = Fl.mass - shift
        Gm[1:] += shift[:-1]
        Gh = DiscreteCdf(grid, Gm)
        v = float(rng.uniform(-1, 1))
        push_ok &= stochastic_dominance(Fl, Gh) and stochastic_dominance(pushforward(Fl, f, v),
                                                                          pushforward(Gh, f, v))

    P = [[0.2, 0.5, 0.3], [0.6, 0.1, 0.3], [0.3, 0.3, 0.4]]
    drv = markov_atom_driver(P, 0, max_length=40)
    law = {}
    for p, cyc in drv.enumeration:
        law[cyc.length] = law.get(cyc.length, 0.0) + p
    n = 100_000
    lengths, _ = drv.sample_cycles(make_rng(88), n)
    z = max(abs(np.mean(lengths == k) - p) / np.sqrt(p * (1 - p) / n) for k, p in law.items() if p > 1e-6)
    fit_ok = z <= 4

    outs = []
    for run in ("a", "b"):
        out = tmp_path / run
        for verb, extra in (("simulate", ["--horizon", "500"]), ("limit", ["--samples", "20000"])):
            main([verb, SRS_SPEC, "--backend", "float",
                  "--seed", "5", "--out", str(out / verb), *extra])
        outs.append({str(p.relative_to(out)): p.read_bytes() for p in sorted(out.rglob("*")) if p.is_file()})
    replay_ok = outs[0] == outs[1] and len(outs[0]) == 4

    ok = metric_ok and push_ok and fit_ok and replay_ok
    assert acceptance("8 metric axioms, monotone pushforward, cycle-law fit, byte-identical replay", ok,
                      f"metric={metric_ok}, pushforward={push_ok}, max |z|={z:.2f}, replay={replay_ok}")
