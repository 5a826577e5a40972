"""Monte Carlo simulation of ``X_{t+1} = f(X_t, xi_t^{Z_t})``.

Each cycle's environment states and shocks are drawn before the recursion is
stepped through it, so the regeneration structure is explicit. Cycles are
drawn in batches of fixed, growing sizes; outputs are therefore a function of
``(seed, stream)`` only and a shorter run is a prefix of a longer one.
"""
from __future__ import annotations

import io
import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .drivers import RegenDriver, mean_cycle_length
from .errors import ConvergenceError, ValidationError
from .ordered import DiscreteCdf, MonotoneMap, StateGrid, uniform_distance
from .rng import make_rng, map_streams

FIRST_BATCH = 64
MAX_BATCH = 1 << 16
CHUNK = 1 << 15


def _cycle_batches(driver: RegenDriver, rng: np.random.Generator):
    """Yield ``(lengths, states, shocks)`` batches forever."""
    size = FIRST_BATCH
    while True:
        lengths, states = driver.sample_cycles(rng, size)
        shocks = driver.sample_shocks(rng, states)
        yield lengths, states, shocks
        size = min(2 * size, MAX_BATCH)


def _interval(fmap: MonotoneMap, interval):
    if interval is not None:
        return tuple(interval)
    if isinstance(fmap.interval, StateGrid):
        return fmap.interval.interval
    if fmap.interval is not None:
        return tuple(fmap.interval)
    raise ValidationError("state interval unknown: pass interval= or use a map that declares one")


def _check_x0(x0, interval):
    if interval is not None and not (interval[0] <= x0 <= interval[1]):
        raise ValidationError(f"x0 = {x0} lies outside the state interval {interval}")


@dataclass(frozen=True, eq=False)
class Trajectory:
    """States ``X_0..X_H`` with regeneration indices ``T_0 = 0 < T_1 < ...``.

    ``env[t]`` and ``shocks[t]`` are the environment state index and shock
    used to go from ``X_t`` to ``X_{t+1}``.
    """

    states: np.ndarray
    regenerations: np.ndarray
    env: np.ndarray
    shocks: np.ndarray

    def __len__(self):
        return len(self.states)

    def cycle_of(self, t: int) -> int:
        """``nu(t)``: index ``n`` with ``T_n <= t < T_{n+1}``."""
        return int(np.searchsorted(self.regenerations, t, side="right")) - 1

    def age(self, t: int) -> int:
        """Steps since the last regeneration (first coordinate of the cycle suffix)."""
        return t - int(self.regenerations[self.cycle_of(t)])

    def to_csv(self, labels=None) -> str:
        buf = io.StringIO()
        buf.write("t,x,env,shock,regeneration\n")
        regen = set(self.regenerations.tolist())
        H = len(self.shocks)
        for t, x in enumerate(self.states):
            if t < H:
                z = self.env[t] if labels is None else labels[self.env[t]]
                v = repr(float(self.shocks[t]))
            else:
                z, v = "", ""
            buf.write(f"{t},{float(x)!r},{z},{v},{int(t in regen)}\n")
        return buf.getvalue()


@dataclass(frozen=True, eq=False)
class CoupledRun:
    top: Trajectory
    bottom: Trajectory
    seed: int
    stream: int

    def order_violations(self) -> int:
        return int(np.sum(self.bottom.states > self.top.states))

    def coalescence_time(self):
        hit = np.flatnonzero(self.bottom.states == self.top.states)
        return int(hit[0]) if hit.size else None


def _simulate_many(fmap, driver, starts, horizon, seed, stream):
    f = fmap.scalar_eval
    k = len(starts)
    xs = np.empty((k, horizon + 1))
    env = np.empty(horizon, dtype=np.int64)
    shocks = np.empty(horizon)
    regen = [0]
    cur = [float(x) for x in starts]
    xs[:, 0] = cur
    t = 0
    for lengths, states, sh in _cycle_batches(driver, make_rng(seed, stream)):
        take = min(len(sh), horizon - t)
        env[t:t + take] = states[:take]
        shocks[t:t + take] = sh[:take]
        ends = t + np.cumsum(lengths)
        regen.extend(ends[ends <= horizon].tolist())
        for j in range(k):
            x = cur[j]
            row = xs[j]
            for i, v in enumerate(sh[:take].tolist(), start=t + 1):
                x = f(x, v)
                row[i] = x
            cur[j] = x
        t += take
        if t >= horizon:
            break
    regen = np.asarray(regen, dtype=np.int64)
    return [Trajectory(xs[j], regen, env, shocks) for j in range(k)]


def simulate(fmap: MonotoneMap, driver: RegenDriver, x0, horizon: int, seed: int,
             stream: int = 0, interval=None) -> Trajectory:
    """Run the recursion for ``horizon`` steps from ``x0``."""
    if horizon < 1:
        raise ValidationError("horizon must be >= 1")
    if interval is not None or fmap.interval is not None:
        _check_x0(x0, _interval(fmap, interval))
    return _simulate_many(fmap, driver, [x0], int(horizon), seed, stream)[0]


def coupled_pair(fmap: MonotoneMap, driver: RegenDriver, horizon: int, seed: int,
                 stream: int = 0, interval=None) -> CoupledRun:
    """Top- and bottom-started trajectories on the same environment and shocks."""
    if horizon < 1:
        raise ValidationError("horizon must be >= 1")
    lo, hi = _interval(fmap, interval)
    top, bottom = _simulate_many(fmap, driver, [hi, lo], int(horizon), seed, stream)
    return CoupledRun(top, bottom, seed, stream)


def embedded_samples(fmap: MonotoneMap, driver: RegenDriver, x0, n_cycles: int, seed: int,
                     stream: int = 0) -> np.ndarray:
    """``Y_0 = x0, Y_1, ..., Y_n``: the state at successive regeneration times."""
    if n_cycles < 1:
        raise ValidationError("n_cycles must be >= 1")
    f = fmap.scalar_eval
    out = np.empty(n_cycles + 1)
    x = float(x0)
    out[0] = x
    n = 0
    for lengths, _, sh in _cycle_batches(driver, make_rng(seed, stream)):
        sh = sh.tolist()
        k = 0
        for L in lengths.tolist():
            for v in sh[k:k + L]:
                x = f(x, v)
            k += L
            n += 1
            out[n] = x
            if n == n_cycles:
                return out
    raise AssertionError("unreachable")


class LimitEstimate(NamedTuple):
    cdf: DiscreteCdf
    samples: int
    ess: float


def effective_sample_size(x: np.ndarray) -> float:
    """ESS from the initial positive sequence of autocorrelations."""
    x = np.asarray(x, dtype=float)
    n = x.size
    xc = x - x.mean()
    var = xc @ xc / n
    if var == 0:
        return float(n)
    m = 1 << (2 * n - 1).bit_length()
    spec = np.fft.rfft(xc, m)
    acf = np.fft.irfft(spec * np.conj(spec), m)[:n] / (n * var)
    tau = 1.0
    for k in range(1, n - 1, 2):
        pair = acf[k] + acf[k + 1]
        if pair <= 0:
            break
        tau += 2 * pair
    return float(n / tau)


def estimate_limit_distribution(fmap: MonotoneMap, driver: RegenDriver, burn_in: int, samples: int,
                                seed: int, x0=None, grid: StateGrid | None = None, stream: int = 0,
                                interval=None) -> LimitEstimate:
    """Time-average empirical law of ``X_t`` for ``burn_in < t <= burn_in + samples``."""
    if samples < 1:
        raise ValidationError("samples must be >= 1")
    lo, hi = _interval(fmap, interval if interval is not None else
                       (grid.interval if grid is not None else None))
    x0 = lo if x0 is None else x0
    traj = simulate(fmap, driver, x0, burn_in + samples, seed, stream, interval=(lo, hi))
    xs = traj.states[burn_in + 1:]
    if grid is not None:
        cdf = DiscreteCdf.empirical(xs, grid=grid if grid.backend == "float" else
                                    StateGrid([float(p) for p in grid.points]))
    else:
        cdf = DiscreteCdf.empirical(xs, interval=(float(lo), float(hi)))
    return LimitEstimate(cdf, len(xs), effective_sample_size(xs))


def run_cycles(fmap: MonotoneMap, x, lengths: np.ndarray, shocks: np.ndarray) -> np.ndarray:
    """Push each ``x[i]`` through cycle ``i`` (vectorized over cycles)."""
    x = np.array(x, dtype=float)
    m = len(lengths)
    L = int(lengths.max())
    pad = np.zeros((m, L))
    mask = np.arange(L)[None, :] < lengths[:, None]
    pad[mask] = shocks
    for j in range(L):
        live = mask[:, j]
        if live.all():
            x = np.asarray(fmap(x, pad[:, j]), dtype=float)
        else:
            x[live] = fmap(x[live], pad[live, j])
    return x


class SplittingEstimate(NamedTuple):
    c: float
    eps1: float
    eps2: float
    se1: float
    se2: float


def _split_counts(n, streams):
    base, extra = divmod(n, streams)
    return [base + (s < extra) for s in range(streams)]


def splitting_finals(fmap: MonotoneMap, driver: RegenDriver, cycles: int, seed: int,
                     interval=None, streams: int = 1, cycles_per_block: int = 1):
    """Top-started and bottom-started states after one block, on independent cycle draws."""
    lo, hi = _interval(fmap, interval)
    counts = _split_counts(int(cycles), streams)

    def work(s):
        rng_top = make_rng(seed, 2 * s)
        rng_bot = make_rng(seed, 2 * s + 1)
        top = np.full(counts[s], float(hi))
        bot = np.full(counts[s], float(lo))
        for _ in range(cycles_per_block):
            top = _block(fmap, driver, rng_top, top)
            bot = _block(fmap, driver, rng_bot, bot)
        return top, bot

    parts = map_streams(work, range(streams))
    return np.concatenate([p[0] for p in parts]), np.concatenate([p[1] for p in parts])


def _block(fmap, driver, rng, x):
    out = np.empty_like(x)
    for a in range(0, len(x), CHUNK):
        b = min(len(x), a + CHUNK)
        lengths, states = driver.sample_cycles(rng, b - a)
        shocks = driver.sample_shocks(rng, states)
        out[a:b] = run_cycles(fmap, x[a:b], lengths, shocks)
    return out


def estimate_splitting(fmap: MonotoneMap, driver: RegenDriver, c, cycles: int, seed: int,
                       interval=None, streams: int = 1, cycles_per_block: int = 1) -> SplittingEstimate:
    """Monte Carlo ``eps1 = P(top -> <= c)`` and ``eps2 = P(bottom -> >= c)`` over one block.

    The two events are evaluated on independent cycle draws.
    """
    if cycles < 1:
        raise ValidationError("cycles must be >= 1")
    lo, hi = _interval(fmap, interval)
    if not (lo <= c <= hi):
        raise ValidationError(f"c = {c} lies outside the state interval")
    top, bot = splitting_finals(fmap, driver, cycles, seed, (lo, hi), streams, cycles_per_block)
    return _splitting_from_finals(c, top, bot)


def _splitting_from_finals(c, top, bot):
    e1 = float(np.mean(top <= c))
    e2 = float(np.mean(bot >= c))
    n1, n2 = len(top), len(bot)
    return SplittingEstimate(float(c), e1, e2, math.sqrt(e1 * (1 - e1) / n1), math.sqrt(e2 * (1 - e2) / n2))


def sweep_splitting(fmap: MonotoneMap, driver: RegenDriver, candidates, cycles: int, seed: int,
                    interval=None, streams: int = 1, cycles_per_block: int = 1):
    """Evaluate candidate splitting points on shared draws; returns ``(best, all)``.

    ``best`` maximizes ``min(eps1, eps2)``.
    """
    top, bot = splitting_finals(fmap, driver, cycles, seed, interval, streams, cycles_per_block)
    results = [_splitting_from_finals(c, top, bot) for c in candidates]
    best = max(results, key=lambda r: min(r.eps1, r.eps2))
    return best, results


class ContractionProfile(NamedTuple):
    d: np.ndarray
    se: np.ndarray
    replications: int


def contraction_profile(fmap: MonotoneMap, driver: RegenDriver, k_max: int, seed: int,
                        replications: int | None = None, se_bound: float = 0.01,
                        cycles_per_block: int = 1, interval=None, streams: int = 1,
                        coupled: bool = True) -> ContractionProfile:
    """Estimated ``d(F^{(bottom)}, F^{(top)})`` after ``k`` blocks, ``k = 1..k_max``.

    ``replications`` defaults to the smallest count whose CDF standard error is
    at most ``se_bound``. With ``coupled`` the two starts share their cycles
    and shocks; otherwise they use independent streams.
    """
    if k_max < 1:
        raise ValidationError("k_max must be >= 1")
    lo, hi = _interval(fmap, interval)
    R = int(replications) if replications is not None else math.ceil(0.25 / se_bound**2)
    counts = _split_counts(R, streams)

    def work(s):
        rng_top = make_rng(seed, 2 * s)
        rng_bot = rng_top if coupled else make_rng(seed, 2 * s + 1)
        top = np.full(counts[s], float(hi))
        bot = np.full(counts[s], float(lo))
        tops, bots = [], []
        for _ in range(k_max):
            for _ in range(cycles_per_block):
                if coupled:
                    top, bot = _coupled_block(fmap, driver, rng_top, top, bot)
                else:
                    top = _block(fmap, driver, rng_top, top)
                    bot = _block(fmap, driver, rng_bot, bot)
            tops.append(top.copy())
            bots.append(bot.copy())
        return tops, bots

    parts = map_streams(work, range(streams))
    d = np.empty(k_max)
    se = np.empty(k_max)
    for k in range(k_max):
        top = np.concatenate([p[0][k] for p in parts])
        bot = np.concatenate([p[1][k] for p in parts])
        d[k], se[k] = _distance_and_se(top, bot, coupled)
    return ContractionProfile(d, se, R)


def _coupled_block(fmap, driver, rng, top, bot):
    top, bot = top.copy(), bot.copy()
    for a in range(0, len(top), CHUNK):
        b = min(len(top), a + CHUNK)
        lengths, states = driver.sample_cycles(rng, b - a)
        shocks = driver.sample_shocks(rng, states)
        top[a:b] = run_cycles(fmap, top[a:b], lengths, shocks)
        bot[a:b] = run_cycles(fmap, bot[a:b], lengths, shocks)
    return top, bot


def _distance_and_se(top, bot, coupled):
    xs = np.union1d(top, bot)
    ft = np.searchsorted(np.sort(top), xs, side="right") / len(top)
    fb = np.searchsorted(np.sort(bot), xs, side="right") / len(bot)
    diff = np.abs(fb - ft)
    i = int(np.argmax(diff))
    r = xs[i]
    if coupled:
        D = (bot <= r).astype(float) - (top <= r).astype(float)
        se = D.std() / math.sqrt(len(D))
    else:
        se = math.sqrt(fb[i] * (1 - fb[i]) / len(bot) + ft[i] * (1 - ft[i]) / len(top))
    return float(diff[i]), float(se)


class _CycleBuffer:
    """Hands out pre-drawn cycles to ``R`` replications as they finish their current one.

    Cycles come from a shared pool drawn in large batches, in replication
    order, so the assignment is deterministic given the generator.
    """

    def __init__(self, driver: RegenDriver, rng, R: int):
        self.driver = driver
        self.rng = rng
        self.batch = max(int(R), 4096)
        self.flat = np.empty(0)
        self.starts = np.empty(0, dtype=np.int64)
        self.ends = np.empty(0, dtype=np.int64)
        self.next_cycle = 0
        self.pos = np.zeros(R, dtype=np.int64)
        self.end = np.zeros(R, dtype=np.int64)
        self._assign(np.arange(R))
        self.first = True

    def _draw(self, need):
        while len(self.starts) - self.next_cycle < need:
            lengths, states = self.driver.sample_cycles(self.rng, self.batch)
            shocks = self.driver.sample_shocks(self.rng, states)
            # drop consumed shocks that no replication still points into
            keep = int(min(self.pos.min(initial=len(self.flat)),
                           self.starts[self.next_cycle] if self.next_cycle < len(self.starts) else len(self.flat)))
            self.flat = np.concatenate([self.flat[keep:], shocks])
            self.pos -= keep
            self.end -= keep
            offset = len(self.flat) - len(shocks)
            ends = offset + np.cumsum(lengths)
            self.starts = np.concatenate([self.starts[self.next_cycle:] - keep, ends - lengths])
            self.ends = np.concatenate([self.ends[self.next_cycle:] - keep, ends])
            self.next_cycle = 0

    def _assign(self, idx):
        self._draw(len(idx))
        k = self.next_cycle
        self.pos[idx] = self.starts[k:k + len(idx)]
        self.end[idx] = self.ends[k:k + len(idx)]
        self.next_cycle += len(idx)

    def next(self):
        """Shocks for the next step and a flag marking regeneration times."""
        done = np.flatnonzero(self.pos >= self.end)
        regen = np.full(len(self.pos), self.first)
        self.first = False
        if done.size:
            self._assign(done)
            regen[done] = True
        v = self.flat[self.pos]
        self.pos += 1
        return v, regen


def coupled_ensemble(fmap: MonotoneMap, driver: RegenDriver, starts, horizon: int, replications: int,
                     seed: int, stream: int = 0, interval=None) -> np.ndarray:
    """Run ``replications`` independent environments, each shared by all ``starts``.

    Returns an array of shape ``(len(starts), replications)`` with ``X_horizon``.
    """
    if interval is not None or fmap.interval is not None:
        for x0 in starts:
            _check_x0(x0, _interval(fmap, interval))
    buf = _CycleBuffer(driver, make_rng(seed, stream), int(replications))
    X = np.array([np.full(replications, float(x0)) for x0 in starts])
    k = len(starts)
    for _ in range(int(horizon)):
        v, _ = buf.next()
        X = np.asarray(fmap(X.ravel(), np.tile(v, k)), dtype=float).reshape(k, -1)
    return X


def simulate_ensemble(fmap: MonotoneMap, driver: RegenDriver, x0, horizon: int, replications: int,
                      seed: int, stream: int = 0, interval=None) -> np.ndarray:
    """``X_horizon`` for ``replications`` independent runs from ``x0``."""
    return coupled_ensemble(fmap, driver, [x0], horizon, replications, seed, stream, interval)[0]


def long_run_distribution(fmap: MonotoneMap, driver: RegenDriver, x0, burn_in: int, samples: int,
                          seed: int, stream: int = 0, chains: int = 256, interval=None) -> LimitEstimate:
    """Time-average law over ``chains`` independent runs from ``x0``.

    Each chain is burned in for ``burn_in`` steps and then observed for
    ``samples`` steps. ``ess`` scales the first chain's effective sample size
    by the number of chains.
    """
    if samples < 1 or chains < 1:
        raise ValidationError("samples and chains must be >= 1")
    lo, hi = _interval(fmap, interval)
    _check_x0(x0, (lo, hi))
    buf = _CycleBuffer(driver, make_rng(seed, stream), int(chains))
    X = np.full(chains, float(x0))
    for _ in range(int(burn_in)):
        v, _ = buf.next()
        X = np.asarray(fmap(X, v), dtype=float)
    out = np.empty((int(samples), chains))
    for t in range(int(samples)):
        v, _ = buf.next()
        X = np.asarray(fmap(X, v), dtype=float)
        out[t] = X
    cdf = DiscreteCdf.empirical(out.ravel(), interval=(float(lo), float(hi)))
    return LimitEstimate(cdf, out.size, chains * effective_sample_size(out[:, 0]))


def ensemble_distance(fmap: MonotoneMap, driver: RegenDriver, starts, horizon: int, replications: int,
                      seed: int, interval=None, common: bool = False):
    """Kolmogorov distance between the time-``horizon`` laws from two starts.

    With ``common`` both starts share every environment path and shock;
    otherwise each start gets its own stream.
    """
    lo, hi = _interval(fmap, interval)
    if common:
        X = coupled_ensemble(fmap, driver, starts, horizon, replications, seed, 0, (lo, hi))
    else:
        X = [simulate_ensemble(fmap, driver, x0, horizon, replications, seed, s, (lo, hi))
             for s, x0 in enumerate(starts)]
    F0 = DiscreteCdf.empirical(X[0], interval=(float(lo), float(hi)))
    F1 = DiscreteCdf.empirical(X[1], interval=(float(lo), float(hi)))
    return uniform_distance(F0, F1), F0, F1


def default_burn_in(driver: RegenDriver, eps: float, target: float = 0.01, cycles_per_block: int = 1,
                    mean_length=None, seed: int = 0) -> int:
    """``10 * E tau * N * k`` with ``(1 - eps)^k < target``."""
    if not (0 < eps <= 1):
        raise ValidationError("burn-in needs a positive splitting probability")
    k = 1 if eps == 1 else math.floor(math.log(target) / math.log(1 - eps)) + 1
    if mean_length is None:
        if driver.kind == "atom":
            mean_length = float(driver.exact_mean_length())
        elif driver.has_enumeration and driver.tail_mass == 0:
            mean_length = float(mean_cycle_length(driver).mean)
        else:
            mean_length = mean_cycle_length(driver, samples=100_000, seed=seed).mean
    return int(math.ceil(10 * float(mean_length) * cycles_per_block * k))


class BurnIn(NamedTuple):
    steps: int
    eps: float
    c: float
    cycles_per_block: int


def calibrate_burn_in(fmap: MonotoneMap, driver: RegenDriver, seed: int = 0, interval=None,
                      candidates=None, cycles: int = 20_000, min_eps: float = 0.05,
                      max_block: int = 4096) -> BurnIn:
    """Burn-in from a Monte Carlo splitting estimate.

    The block length (in cycles) doubles until the best candidate splitting
    point has ``min(eps1, eps2) >= min_eps``; the result then goes through
    :func:`default_burn_in`.
    """
    lo, hi = _interval(fmap, interval)
    if candidates is None:
        candidates = np.linspace(float(lo), float(hi), 34)[1:-1]
    N = 1
    while True:
        best, _ = sweep_splitting(fmap, driver, candidates, cycles, seed, (lo, hi), cycles_per_block=N)
        eps = min(best.eps1, best.eps2)
        if eps >= min_eps:
            return BurnIn(default_burn_in(driver, eps, cycles_per_block=N, seed=seed), eps, best.c, N)
        N *= 2
        if N > max_block:
            raise ConvergenceError(f"no splitting point reaches eps >= {min_eps} within {max_block} cycles")
