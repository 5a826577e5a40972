"""Ordered state grids, distribution functions and monotone maps.

Everything downstream compares distributions through :func:`uniform_distance`,
the sup-norm distance between right-continuous distribution functions.
Two numeric backends are supported: ``"float"`` (binary64, numpy arrays) and
``"rational"`` (:class:`fractions.Fraction` held in object arrays).
"""
from __future__ import annotations

import bisect
import io
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Iterable, NamedTuple, Sequence

import numpy as np

from .errors import DomainMismatchError, ValidationError

BACKENDS = ("float", "rational")
FLOAT_TOL = 1e-12


def as_number(x, backend="float"):
    """Coerce ``x`` to the scalar type of ``backend``.

    Rational coercion reads floats through their shortest repr, so ``0.1``
    becomes ``1/10`` rather than the binary expansion. Strings like ``"3/16"``
    and ``[num, den]`` pairs are accepted by both backends.
    """
    if isinstance(x, (list, tuple)) and len(x) == 2:
        x = Fraction(int(x[0]), int(x[1]))
    if backend == "rational":
        if isinstance(x, Fraction):
            return x
        if isinstance(x, (int, np.integer)):
            return Fraction(int(x))
        if isinstance(x, str):
            return Fraction(x)
        return Fraction(repr(float(x)))
    if backend == "float":
        if isinstance(x, str):
            return float(Fraction(x))
        return float(x)
    raise ValidationError(f"unknown backend {backend!r}")


def _check_backend(backend):
    if backend not in BACKENDS:
        raise ValidationError(f"backend must be one of {BACKENDS}, got {backend!r}")


def _array(values, backend):
    if backend == "rational":
        out = np.empty(len(values), dtype=object)
        out[:] = [as_number(v, "rational") for v in values]
        return out
    return np.asarray([as_number(v, "float") for v in values], dtype=float)


class StateGrid:
    """Strictly increasing finite set of states; first point is bottom, last is top.

    The grid also records the affine rescaling onto the canonical interval
    ``[0, 1]`` so that reports can be produced in the original units.
    """

    __slots__ = ("points", "backend")

    def __init__(self, points: Iterable, backend: str = "float"):
        _check_backend(backend)
        pts = _array(list(points), backend)
        if len(pts) < 2:
            raise ValidationError("a state grid needs at least two points")
        if any(not (pts[i] < pts[i + 1]) for i in range(len(pts) - 1)):
            raise ValidationError("grid points must be strictly increasing")
        pts.flags.writeable = False
        self.points = pts
        self.backend = backend

    def __len__(self):
        return len(self.points)

    def __repr__(self):
        return f"StateGrid(n={len(self)}, [{self.bottom}, {self.top}], {self.backend})"

    def __eq__(self, other):
        return (
            isinstance(other, StateGrid)
            and len(self) == len(other)
            and all(a == b for a, b in zip(self.points, other.points))
        )

    def __hash__(self):
        return hash(tuple(self.points.tolist()))

    @property
    def bottom(self):
        return self.points[0]

    @property
    def top(self):
        return self.points[-1]

    @property
    def interval(self):
        return (self.bottom, self.top)

    def to_unit(self, x):
        return (x - self.bottom) / (self.top - self.bottom)

    def from_unit(self, u):
        return self.bottom + u * (self.top - self.bottom)

    def to_float(self) -> "StateGrid":
        if self.backend == "float":
            return self
        return StateGrid([float(p) for p in self.points])

    def contains(self, x) -> bool:
        return self.bottom <= x <= self.top

    def index(self, x) -> int:
        """Index of grid point ``x``; raises if ``x`` is not on the grid."""
        pts = self.points
        if self.backend == "rational":
            i = bisect.bisect_left(list(pts), x)
            if i < len(pts) and pts[i] == x:
                return i
        else:
            i = int(np.searchsorted(pts, x))
            for j in (i - 1, i):
                if 0 <= j < len(pts) and abs(pts[j] - x) <= FLOAT_TOL * max(1.0, abs(x)):
                    return j
        raise ValidationError(f"{x!r} is not a grid point")

    def lookup(self, x):
        """Like :meth:`index` but returns ``None`` off-grid."""
        try:
            return self.index(x)
        except ValidationError:
            return None


def _same_interval(a: StateGrid, b: StateGrid) -> bool:
    if a.backend == b.backend == "rational":
        return a.bottom == b.bottom and a.top == b.top
    scale = max(1.0, abs(float(a.top)), abs(float(a.bottom)))
    return (abs(float(a.bottom) - float(b.bottom)) <= FLOAT_TOL * scale
            and abs(float(a.top) - float(b.top)) <= FLOAT_TOL * scale)


@dataclass(frozen=True, eq=False)
class DiscreteCdf:
    """Probability distribution on a :class:`StateGrid`.

    ``cdf[i]`` is ``P(X <= points[i])`` (right-continuous convention).
    """

    grid: StateGrid
    mass: np.ndarray
    cdf: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        backend = self.grid.backend
        mass = _array(list(self.mass), backend)
        if len(mass) != len(self.grid):
            raise ValidationError("mass vector length differs from grid length")
        if any(m < 0 for m in mass):
            raise ValidationError("masses must be nonnegative")
        total = sum(mass, Fraction(0) if backend == "rational" else 0.0)
        if backend == "rational":
            if total != 1:
                raise ValidationError(f"masses sum to {total}, not 1")
        elif abs(total - 1.0) > FLOAT_TOL * len(mass) + FLOAT_TOL:
            raise ValidationError(f"masses sum to {total!r}, not 1")
        cdf = np.cumsum(mass)
        if backend == "float":
            cdf = np.minimum(cdf / total, 1.0)
            cdf[-1] = 1.0
        mass.flags.writeable = False
        cdf.flags.writeable = False
        object.__setattr__(self, "mass", mass)
        object.__setattr__(self, "cdf", cdf)

    @property
    def backend(self):
        return self.grid.backend

    @property
    def points(self):
        return self.grid.points

    @classmethod
    def point_mass(cls, grid: StateGrid, x) -> "DiscreteCdf":
        i = grid.index(x)
        one, zero = (Fraction(1), Fraction(0)) if grid.backend == "rational" else (1.0, 0.0)
        return cls(grid, [one if j == i else zero for j in range(len(grid))])

    @classmethod
    def empirical(cls, samples, grid: StateGrid | None = None, interval=None) -> "DiscreteCdf":
        """Empirical law of ``samples``.

        With ``grid`` every sample must be a grid point. Otherwise the support
        is the set of distinct sample values plus the endpoints of
        ``interval``.
        """
        samples = np.asarray(samples, dtype=float).ravel()
        if samples.size == 0:
            raise ValidationError("no samples")
        if grid is None:
            lo, hi = interval if interval is not None else (samples.min(), samples.max())
            if samples.min() < lo or samples.max() > hi:
                raise ValidationError("samples fall outside the interval")
            pts, counts = np.unique(samples, return_counts=True)
            extra = [v for v in (float(lo), float(hi)) if v not in set(pts.tolist())]
            if extra:
                pts = np.concatenate([pts, extra])
                counts = np.concatenate([counts, np.zeros(len(extra), dtype=counts.dtype)])
                order = np.argsort(pts)
                pts, counts = pts[order], counts[order]
            return cls(StateGrid(pts), counts / samples.size)
        pts = np.asarray(grid.points, dtype=float)
        idx = np.clip(np.searchsorted(pts, samples), 0, len(pts) - 1)
        lower = np.clip(idx - 1, 0, len(pts) - 1)
        use_lower = np.abs(pts[lower] - samples) < np.abs(pts[idx] - samples)
        idx = np.where(use_lower, lower, idx)
        scale = np.maximum(1.0, np.abs(samples))
        if np.any(np.abs(pts[idx] - samples) > 1e-9 * scale):
            raise ValidationError("samples are not grid points")
        counts = np.bincount(idx, minlength=len(pts))
        if grid.backend == "rational":
            n = samples.size
            return cls(grid, [Fraction(int(c), n) for c in counts])
        return cls(grid, counts / samples.size)

    def __call__(self, x):
        """``F(x) = P(X <= x)``."""
        i = _right_index(self.points, x, self.backend)
        if i < 0:
            return Fraction(0) if self.backend == "rational" else 0.0
        return self.cdf[i]

    def left(self, x):
        """``F(x-) = P(X < x)``."""
        i = _left_index(self.points, x, self.backend)
        if i < 0:
            return Fraction(0) if self.backend == "rational" else 0.0
        return self.cdf[i]

    def values_at(self, xs) -> np.ndarray:
        if self.backend == "float":
            xs = np.asarray(xs, dtype=float)
            idx = np.searchsorted(self.points, xs, side="right") - 1
            out = np.where(idx >= 0, self.cdf[np.clip(idx, 0, None)], 0.0)
            return out
        return np.array([self(x) for x in xs], dtype=object)

    def mean(self):
        return sum(m * x for m, x in zip(self.mass, self.points))

    def to_float(self) -> "DiscreteCdf":
        if self.backend == "float":
            return self
        return DiscreteCdf(StateGrid([float(p) for p in self.points]),
                           [float(m) for m in self.mass])

    def to_csv(self) -> str:
        """CSV with columns ``x, mass, cdf``; floats round-trip, rationals print as ``p/q``."""
        buf = io.StringIO()
        buf.write("x,mass,cdf\n")
        for x, m, c in zip(self.points, self.mass, self.cdf):
            buf.write(f"{_fmt(x)},{_fmt(m)},{_fmt(c)}\n")
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "DiscreteCdf":
        rows = [line.split(",") for line in text.strip().splitlines()[1:]]
        if any("/" in r[1] for r in rows):
            return cls(StateGrid([r[0] for r in rows], "rational"), [Fraction(r[1]) for r in rows])
        return cls(StateGrid([float(r[0]) for r in rows]), [float(r[1]) for r in rows])


def _fmt(x) -> str:
    if isinstance(x, Fraction):
        return str(x)
    return repr(float(x))


def _right_index(points, x, backend) -> int:
    if backend == "float":
        return int(np.searchsorted(points, x, side="right")) - 1
    return bisect.bisect_right(list(points), x) - 1


def _left_index(points, x, backend) -> int:
    if backend == "float":
        return int(np.searchsorted(points, x, side="left")) - 1
    return bisect.bisect_left(list(points), x) - 1


def _merged_values(F: DiscreteCdf, G: DiscreteCdf):
    if not _same_interval(F.grid, G.grid):
        raise DomainMismatchError(
            f"distributions live on different intervals {F.grid.interval} and {G.grid.interval}"
        )
    if F.backend == G.backend == "rational":
        xs = sorted(set(F.points) | set(G.points))
        return [F(x) for x in xs], [G(x) for x in xs]
    xs = np.union1d(np.asarray(F.points, dtype=float), np.asarray(G.points, dtype=float))
    return F.to_float().values_at(xs), G.to_float().values_at(xs)


def uniform_distance(F: DiscreteCdf, G: DiscreteCdf):
    """Kolmogorov distance ``sup_x |F(x) - G(x)|``.

    Both CDFs are step functions, so the supremum is attained at a jump point
    of one of them; it is evaluated exactly on the merged jump set.
    """
    fv, gv = _merged_values(F, G)
    if F.backend == G.backend == "rational":
        return max(abs(a - b) for a, b in zip(fv, gv))
    return float(np.max(np.abs(fv - gv)))


def stochastic_dominance(F: DiscreteCdf, G: DiscreteCdf) -> bool:
    """True iff ``F(x) >= G(x)`` everywhere, i.e. ``F`` is stochastically below ``G``."""
    fv, gv = _merged_values(F, G)
    if F.backend == G.backend == "rational":
        return all(a >= b for a, b in zip(fv, gv))
    return bool(np.all(np.asarray(fv) >= np.asarray(gv) - FLOAT_TOL))


@dataclass(frozen=True)
class MonotoneMap:
    """Recursion kernel ``x_next = func(x, v)``, nondecreasing in ``x``.

    ``func`` must broadcast over numpy arrays. ``scalar`` is an optional fast
    path for plain Python floats used by single-trajectory loops.
    ``shock_values`` optionally describes the shock domain and ``interval``
    the state interval the map keeps invariant.
    """

    func: Callable
    scalar: Callable | None = None
    shock_values: tuple | None = None
    name: str = ""
    interval: tuple | None = None

    def __call__(self, x, v):
        return self.func(x, v)

    def scalar_eval(self, x, v):
        if self.scalar is not None:
            return self.scalar(x, v)
        return float(self.func(x, v))


class Violation(NamedTuple):
    shock: object
    x1: object
    x2: object


def verify_monotone(fmap: MonotoneMap, grid: StateGrid, shocks: Sequence) -> list[Violation]:
    """List every adjacent pair ``x1 < x2`` with ``f(x1, v) > f(x2, v)``.

    An empty list certifies monotonicity on ``grid x shocks``.
    """
    if len(shocks) == 0:
        raise ValidationError("shock list is empty")
    pts = list(grid.points)
    out = []
    for v in shocks:
        vals = [fmap(x, v) for x in pts]
        for i in range(len(pts) - 1):
            if vals[i] > vals[i + 1]:
                out.append(Violation(v, pts[i], pts[i + 1]))
    return out


def verify_range(fmap: MonotoneMap, grid: StateGrid, shocks: Sequence) -> list[tuple]:
    """Triples ``(v, x, f(x, v))`` whose image leaves the grid interval."""
    lo, hi = grid.interval
    return [(v, x, y) for v in shocks for x in grid.points
            for y in [fmap(x, v)] if not (lo <= y <= hi)]


def pushforward(F: DiscreteCdf, fmap: MonotoneMap, v) -> DiscreteCdf:
    """Law of ``f(X, v)`` for ``X ~ F`` and a fixed shock value ``v``."""
    backend = F.backend
    images = [fmap(x, v) for x in F.points]
    if backend == "rational":
        images = [as_number(y, "rational") for y in images]
    else:
        images = [float(y) for y in images]
    support = sorted(set(images) | {F.grid.bottom, F.grid.top})
    pos = {y: i for i, y in enumerate(support)}
    zero = Fraction(0) if backend == "rational" else 0.0
    mass = [zero] * len(support)
    for y, m in zip(images, F.mass):
        mass[pos[y]] += m
    return DiscreteCdf(StateGrid(support, backend), mass)


def identity_map() -> MonotoneMap:
    return MonotoneMap(lambda x, v: x + 0 * v, scalar=lambda x, v: x, name="identity")


def reset_map() -> MonotoneMap:
    """``f(x, v) = v``: forgets the state in one step."""
    return MonotoneMap(lambda x, v: v + 0 * x, scalar=lambda x, v: v, name="reset")


def clamp_add_map(lo, hi) -> MonotoneMap:
    """``f(x, v) = min(hi, max(lo, x + v))``."""
    flo, fhi = float(lo), float(hi)

    def func(x, v):
        if isinstance(x, np.ndarray) or isinstance(v, np.ndarray):
            return np.minimum(fhi, np.maximum(flo, x + v))
        return min(hi, max(lo, x + v))

    return MonotoneMap(func, scalar=lambda x, v: min(fhi, max(flo, x + v)),
                       name=f"clamp_add[{lo},{hi}]", interval=(lo, hi))
