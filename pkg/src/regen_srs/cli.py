"""Command-line entry point: ``regen-srs VERB [SPEC] [options]``.

Every verb writes CSV files plus ``metadata.json`` into ``--out``. Exit codes:
0 on success, 2 on invalid input, 3 when a numerical method does not converge.
"""
from __future__ import annotations

import argparse
import math
import sys
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import __version__, engine, exact
from .drivers import aperiodicity_check
from .errors import AmbiguousStationaryError, BudgetExceededError, ConvergenceError, SRSError, ValidationError
from .io import (MODEL_KINDS, Job, build_job, file_digest, load_json, rows_to_csv, write_metadata, write_text)
from .ordered import DiscreteCdf, StateGrid, as_number, verify_monotone

EXIT_OK, EXIT_INVALID, EXIT_NONCONVERGED = 0, 2, 3
SPEC_VERBS = ("simulate", "couple", "splitting", "embedded", "stationary", "limit", "contraction", "validate")


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="regen-srs", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--streams", type=int, default=1)
    common.add_argument("--out", type=Path, default=Path("out"))
    common.add_argument("--backend", choices=["float", "rational"])
    common.add_argument("--tol", type=float, default=1e-8)
    common.add_argument("--max-iter", type=int, default=5000)
    common.add_argument("--cycles", type=int, default=100_000)
    common.add_argument("--burn-in", type=int)
    common.add_argument("--samples", type=int, default=100_000)
    sub = p.add_subparsers(dest="verb", required=True)
    for verb in SPEC_VERBS:
        s = sub.add_parser(verb, parents=[common])
        s.add_argument("spec", type=Path)
        if verb in ("simulate", "couple"):
            s.add_argument("--horizon", type=int, default=100)
        if verb in ("simulate", "embedded", "limit"):
            s.add_argument("--x0")
        if verb == "splitting":
            s.add_argument("--c", help="splitting point; default: every grid point")
            s.add_argument("--method", choices=["exact", "mc"])
            s.add_argument("--block", type=int, default=1, help="cycles per block")
        if verb == "contraction":
            s.add_argument("--k-max", type=int, default=20)
            s.add_argument("--replications", type=int)
            s.add_argument("--se", type=float, default=0.01)
            s.add_argument("--block", type=int, default=1)
    s = sub.add_parser("solve", parents=[common])
    s.add_argument("model", choices=["huggett", "growth", "risksharing"])
    s.add_argument("spec", type=Path, nargs="?")
    s = sub.add_parser("reproduce", parents=[common])
    s.add_argument("target", choices=["example4"])
    return p


# -- verbs ---------------------------------------------------------------------------

def _x0(job: Job, raw):
    return job.x0 if raw is None else as_number(raw, job.backend)


def _need_recursion(job: Job):
    if job.fmap is None:
        raise ValidationError(f"a {job.kind!r} spec does not define a recursion")


def cmd_simulate(job, args, out):
    _need_recursion(job)
    tr = engine.simulate(job.fmap, job.driver, _x0(job, args.x0), args.horizon, args.seed, interval=job.interval)
    write_text(out / "trajectory.csv", tr.to_csv(job.driver.labels))
    return {"horizon": args.horizon, "x0": _x0(job, args.x0)}


def cmd_couple(job, args, out):
    _need_recursion(job)
    run = engine.coupled_pair(job.fmap, job.driver, args.horizon, args.seed, interval=job.interval)
    rows = [(t, a, b, int(b > a)) for t, (a, b) in enumerate(zip(run.top.states, run.bottom.states))]
    write_text(out / "coupled.csv", rows_to_csv(["t", "top", "bottom", "violation"], rows))
    return {"horizon": args.horizon, "violations": run.order_violations(),
            "coalescence_time": run.coalescence_time()}


def cmd_splitting(job, args, out):
    _need_recursion(job)
    method = args.method or ("exact" if job.has_grid else "mc")
    if method == "exact":
        if not job.has_grid:
            raise ValidationError("exact splitting needs a grid")
        chain = exact.embedded_matrix(job.fmap, job.driver, job.grid)
        cs = [as_number(args.c, job.backend)] if args.c is not None else list(job.grid.points)
        rows = []
        for c in cs:
            e1, e2 = exact.splitting_exact(job.fmap, job.driver, job.grid, c, chain=chain)
            rows.append((c, e1, e2, 0, 0))
    else:
        lo, hi = job.interval
        cs = [float(as_number(args.c))] if args.c is not None else (
            [float(x) for x in job.grid.points] if job.has_grid else np.linspace(float(lo), float(hi), 33).tolist())
        _, res = engine.sweep_splitting(job.fmap, job.driver, cs, args.cycles, args.seed, job.interval,
                                        streams=args.streams, cycles_per_block=args.block)
        rows = [(r.c, r.eps1, r.eps2, r.se1, r.se2) for r in res]
    best = max(rows, key=lambda r: min(r[1], r[2]))
    write_text(out / "splitting.csv", rows_to_csv(["c", "eps1", "eps2", "se1", "se2"], rows))
    return {"method": method, "best_c": best[0], "eps": min(best[1], best[2])}


def cmd_embedded(job, args, out):
    _need_recursion(job)
    ys = engine.embedded_samples(job.fmap, job.driver, _x0(job, args.x0), args.cycles, args.seed)
    write_text(out / "embedded.csv", rows_to_csv(["n", "y"], enumerate(ys.tolist())))
    grid = job.grid.to_float() if job.has_grid else None
    F = DiscreteCdf.empirical(ys[1:], grid=grid) if grid else DiscreteCdf.empirical(
        ys[1:], interval=tuple(float(x) for x in job.interval))
    write_text(out / "embedded_law.csv", F.to_csv())
    return {"cycles": args.cycles}


def cmd_stationary(job, args, out):
    if job.kind == "chain":
        from .drivers import _check_stochastic
        b = job.backend
        P = [[as_number(p, b) for p in row] for row in job.doc["transition"]]
        _check_stochastic(P, b)
        labels = job.doc.get("labels") or list(range(len(P)))
        grid = StateGrid(list(range(len(P))), b)
        mat = np.array(P, dtype=object if b == "rational" else float)
        law = exact.stationary(exact.EmbeddedChain(grid, mat))
        rows = [(lab, p) for lab, p in zip(labels, law.pi)]
        write_text(out / "pi.csv", rows_to_csv(["state", "pi"], rows))
        write_text(out / "pi.json", exact.dumps_exact({"labels": labels, "pi": [_enc(p) for p in law.pi]}))
        return {"states": len(P)}
    _need_recursion(job)
    if not job.has_grid:
        raise ValidationError("stationary needs a grid")
    files = write_exact_laws(job, out)
    return {"files": files}


def _enc(x):
    return [x.numerator, x.denominator] if isinstance(x, Fraction) else x


def write_exact_laws(job, out):
    chain = exact.embedded_matrix(job.fmap, job.driver, job.grid)
    law = exact.stationary(chain)
    mu = exact.limiting_mu(job.fmap, job.driver, job.grid, law.pi)
    write_text(out / "P.csv", chain.to_csv())
    write_text(out / "P.json", exact.dumps_exact(chain.to_json()))
    write_text(out / "pi.csv", law.as_cdf().to_csv())
    write_text(out / "pi.json", exact.dumps_exact(law.to_json()))
    write_text(out / "mu.csv", mu.to_csv())
    write_text(out / "mu.json", exact.dumps_exact({"grid": [_enc(x) for x in job.grid.points],
                                                   "mu": [_enc(m) for m in mu.mass]}))
    return ["P.csv", "P.json", "pi.csv", "pi.json", "mu.csv", "mu.json"]


def _burn_in(job, args):
    if args.burn_in is not None:
        return args.burn_in, None
    if job.has_grid and job.grid.backend == "rational" or (job.has_grid and len(job.grid) <= 2000):
        try:
            _, e1, e2 = exact.best_splitting_point(job.fmap, job.driver, job.grid)
            eps = float(min(e1, e2))
            if eps > 0:
                return engine.default_burn_in(job.driver, eps, seed=args.seed), eps
        except (BudgetExceededError, ValidationError):
            pass
    bi = engine.calibrate_burn_in(job.fmap, job.driver, seed=args.seed, interval=job.interval)
    return bi.steps, bi.eps


def cmd_limit(job, args, out):
    _need_recursion(job)
    burn, eps = _burn_in(job, args)
    grid = job.grid if job.has_grid else None
    est = engine.estimate_limit_distribution(job.fmap, job.driver, burn, args.samples, args.seed,
                                             x0=_x0(job, args.x0), grid=grid, interval=job.interval)
    write_text(out / "limit.csv", est.cdf.to_csv())
    return {"burn_in": burn, "eps": eps, "samples": est.samples, "ess": est.ess}


def cmd_contraction(job, args, out):
    _need_recursion(job)
    prof = engine.contraction_profile(job.fmap, job.driver, args.k_max, args.seed, replications=args.replications,
                                      se_bound=args.se, cycles_per_block=args.block, interval=job.interval,
                                      streams=args.streams)
    eps = None
    if job.has_grid and args.block == 1:
        try:
            _, e1, e2 = exact.best_splitting_point(job.fmap, job.driver, job.grid)
            eps = min(e1, e2)
        except (BudgetExceededError, ValidationError):
            eps = None
    rows = []
    for k in range(args.k_max):
        bound = float((1 - eps) ** (k + 1)) if eps else None
        rows.append((k + 1, prof.d[k], prof.se[k], bound))
    write_text(out / "contraction.csv", rows_to_csv(["k", "d", "se", "bound"], rows))
    return {"replications": prof.replications, "eps": eps}


def cmd_solve(args, out):
    from . import fixtures, models
    if args.spec is None:
        spec = {"huggett": fixtures.huggett_fixture, "growth": fixtures.growth_fixture,
                "risksharing": fixtures.risk_sharing_fixture}[args.model]()
        doc = spec.to_json()
    else:
        doc = load_json(args.spec)
    if doc.get("kind") != args.model:
        raise ValidationError(f"spec kind {doc.get('kind')!r} does not match {args.model!r}")
    job = build_job(doc, tol=args.tol, max_iter=args.max_iter, solve_models=False)
    solved = models.solve(job.model, tol=args.tol, max_iter=args.max_iter)
    if args.model == "risksharing":
        rs = models.risk_sharing_map(solved)
        rows = [(y, lo, hi) for y, (lo, hi) in zip(solved.endowments, solved.intervals)]
        write_text(out / "intervals.csv", rows_to_csv(["endowment", "lo", "hi"], rows))
        return {"first_best": rs.first_best, "c_min": rs.c_min, "c_max": rs.c_max, "c_split": rs.c_split}
    write_text(out / "policy.csv", solved.to_csv())
    meta = {"iterations": solved.iterations, "residual": solved.residual,
            "max_euler_residual": float(np.nanmax(np.abs(solved.euler))) if np.any(np.isfinite(solved.euler)) else 0.0,
            "monotone": solved.monotone()}
    if args.model == "huggett":
        b = models.huggett_bounds(solved)
        meta.update(a_bar=b.a_bar, c=b.c, down_states=b.down_states, up_states=b.up_states)
    else:
        gi = models.growth_interval(solved) if len(solved.shocks) > 1 else None
        if gi:
            meta.update(k_prime=gi.k_prime, k_double_prime=gi.k_double_prime, lemma_failures=len(gi.lemma_failures))
    return meta


def cmd_reproduce(args, out):
    job = build_job({"kind": "example4"}, backend=args.backend or "rational")
    files = write_exact_laws(job, out)
    return {"files": files, "backend": job.backend}


def cmd_validate(job, args):
    """Run every check that applies to the spec; returns ``[(name, ok, detail)]``."""
    checks = [("schema", True, "")]
    if job.kind == "chain":
        from .drivers import _check_stochastic
        try:
            _check_stochastic([[as_number(p, job.backend) for p in r] for r in job.doc["transition"]], job.backend)
            checks.append(("stochastic matrix", True, ""))
        except ValidationError as exc:
            checks.append(("stochastic matrix", False, str(exc)))
        return checks
    checks.append(("driver", True, f"{job.driver.kind}, states {list(job.driver.labels)}"))
    if job.driver.has_enumeration:
        lengths = sorted({len(s) for _, s in job.driver._enumeration})
        ok = aperiodicity_check(job.driver)
        checks.append(("aperiodicity", ok, f"cycle lengths {lengths}"))
    if job.has_grid:
        shocks = sorted({v for law in job.driver.shock_laws for v in law.values})
        bad = verify_monotone(job.fmap, job.grid, shocks)
        checks.append(("monotone on grid", not bad, f"{len(bad)} violations"))
        try:
            exact.step_matrices(job.fmap, job.driver, job.grid)
            checks.append(("grid closure", True, ""))
        except ValidationError as exc:
            checks.append(("grid closure", False, str(exc)))
    return checks


def _validate_model(doc) -> int:
    from .io import check_schema
    from .models import model_checks
    try:
        check_schema(doc)
        print("PASS  schema")
    except ValidationError as exc:
        print(f"FAIL  schema: {exc}")
        return EXIT_INVALID
    checks = model_checks(doc)
    for name, ok in checks:
        print(f"{'PASS' if ok else 'FAIL'}  {name}")
    return EXIT_OK if all(ok for _, ok in checks) else EXIT_INVALID


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        return _run(args)
    except ConvergenceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NONCONVERGED
    except (ValidationError, AmbiguousStationaryError, BudgetExceededError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except SRSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


def _run(args) -> int:
    meta = {"command": args.verb, "version": __version__, "seed": args.seed, "streams": args.streams,
            "backend": args.backend, "tol": args.tol, "max_iter": args.max_iter, "cycles": args.cycles,
            "burn_in": args.burn_in, "samples": args.samples}
    for key in ("horizon", "x0", "c", "method", "block", "k_max", "replications", "se", "model", "target"):
        if hasattr(args, key):
            meta[key] = getattr(args, key)
    if args.verb == "validate":
        if not args.spec.is_file():
            raise ValidationError(f"cannot read {args.spec}")
        doc = load_json(args.spec)
        if isinstance(doc, dict) and doc.get("kind") in MODEL_KINDS:
            return _validate_model(doc)
        try:
            job = build_job(doc, backend=args.backend, solve_models=False)
        except ValidationError as exc:
            print(f"FAIL  {exc}")
            return EXIT_INVALID
        checks = cmd_validate(job, args)
        for name, ok, detail in checks:
            print(f"{'PASS' if ok else 'FAIL'}  {name}" + (f": {detail}" if detail else ""))
        return EXIT_OK if all(ok for _, ok, _ in checks) else EXIT_INVALID
    out = args.out
    out.mkdir(parents=True, exist_ok=True)
    if args.verb == "solve":
        if args.spec is not None:
            meta["spec"] = str(args.spec)
            meta["spec_sha256"] = file_digest(args.spec)
        meta.update(cmd_solve(args, out))
    elif args.verb == "reproduce":
        meta.update(cmd_reproduce(args, out))
    else:
        doc = load_json(args.spec)
        meta["spec"] = str(args.spec)
        meta["spec_sha256"] = file_digest(args.spec)
        job = build_job(doc, backend=args.backend, tol=args.tol, max_iter=args.max_iter)
        meta["backend"] = job.backend
        handler = globals()[f"cmd_{args.verb}"]
        meta.update(handler(job, args, out))
    write_metadata(out, _plain(meta))
    return EXIT_OK


def _plain(obj):
    if isinstance(obj, dict):
        return {k: _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, Fraction):
        return str(obj)
    if isinstance(obj, Path):
        return str(obj)
    if isinstance(obj, (np.floating, np.integer, np.bool_)):
        return obj.item()
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    return obj


if __name__ == "__main__":
    sys.exit(main())
