"""Shared pieces for the dynamic-programming models."""
from __future__ import annotations

import io
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from ..drivers import RegenDriver, markov_atom_driver
from ..errors import ValidationError
from ..ordered import MonotoneMap, StateGrid

GOLDEN = (np.sqrt(5.0) - 1.0) / 2.0
SNAP_TOL = 1e-12


def crra(gamma: float):
    """``(u, u')`` for CRRA utility; ``gamma == 1`` is log utility."""
    if gamma == 1:
        return np.log, lambda c: 1.0 / c
    return (lambda c: c ** (1.0 - gamma) / (1.0 - gamma)), (lambda c: c ** (-gamma))


def check_transition(P, name="transition", positive=True) -> np.ndarray:
    P = np.asarray(P, dtype=float)
    if P.ndim != 2 or P.shape[0] != P.shape[1]:
        raise ValidationError(f"{name} must be a square matrix")
    if np.any(P < 0) or not np.allclose(P.sum(axis=1), 1.0, atol=1e-12):
        raise ValidationError(f"{name} rows must be probability vectors")
    if positive and np.any(P <= 0):
        raise ValidationError(f"{name} must have all entries > 0")
    return P


def golden_max(objective, lo, hi, iters: int = 80):
    """Vectorized golden-section maximization of a concave objective on ``[lo, hi]``.

    End-points are compared with the interior optimum so corner solutions are
    returned exactly.
    """
    a, b = np.array(lo, dtype=float), np.array(hi, dtype=float)
    x1 = b - GOLDEN * (b - a)
    x2 = a + GOLDEN * (b - a)
    f1, f2 = objective(x1), objective(x2)
    for _ in range(iters):
        left = f1 >= f2
        # keep [a, x2] when the left probe wins, else [x1, b]
        b = np.where(left, x2, b)
        a = np.where(left, a, x1)
        new = np.where(left, b - GOLDEN * (b - a), a + GOLDEN * (b - a))
        fnew = objective(new)
        x1, x2, f1, f2 = (np.where(left, new, x2), np.where(left, x1, new),
                          np.where(left, fnew, f2), np.where(left, f1, fnew))
    x = 0.5 * (a + b)
    best = np.stack([lo * np.ones_like(x), x, hi * np.ones_like(x)])
    vals = np.stack([objective(best[0]), objective(best[1]), objective(best[2])])
    pick = np.argmax(vals, axis=0)
    return np.take_along_axis(best, pick[None], 0)[0]


def bisect_increasing(g, lo, hi, iters: int = 100):
    """Root of an increasing ``g`` on ``[lo, hi]`` per element, clamped to the bracket."""
    lo, hi = np.array(lo, dtype=float), np.array(hi, dtype=float)
    glo, ghi = g(lo), g(hi)
    a, b = lo.copy(), hi.copy()
    for _ in range(iters):
        m = 0.5 * (a + b)
        gm = g(m)
        up = gm < 0
        a = np.where(up, m, a)
        b = np.where(up, b, m)
    x = 0.5 * (a + b)
    x = np.where(glo >= 0, lo, x)
    return np.where(ghi <= 0, hi, x)


def interp_columns(grid: np.ndarray, table: np.ndarray, x: np.ndarray) -> np.ndarray:
    """``out[i, j, k] = interp(x[i, j], grid, table[:, k])`` with flat extrapolation."""
    return np.stack([np.interp(x, grid, table[:, k]) for k in range(table.shape[1])], axis=-1)


@dataclass(frozen=True, eq=False)
class PolicySolution:
    """Converged value and policy on ``grid x shock states``.

    ``policy[i, z]`` is the continuous optimizer at node ``i`` in state ``z``;
    grid projection happens only in :func:`compile_to_srs`.
    """

    model: str
    grid: np.ndarray
    shocks: np.ndarray
    transition: np.ndarray
    value: np.ndarray
    policy: np.ndarray
    consumption: np.ndarray
    history: list = field(default_factory=list)
    iterations: int = 0
    euler: np.ndarray | None = None
    spec: object = None

    @property
    def residual(self) -> float:
        return self.history[-1] if self.history else float("nan")

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write("state,shock,policy,value\n")
        for z, s in enumerate(self.shocks):
            for i, x in enumerate(self.grid):
                buf.write(f"{float(x)!r},{float(s)!r},{float(self.policy[i, z])!r},{float(self.value[i, z])!r}\n")
        return buf.getvalue()

    def monotone(self) -> bool:
        return bool(np.all(np.diff(self.policy, axis=0) >= -1e-12))


class SrsModel(NamedTuple):
    fmap: MonotoneMap
    driver: RegenDriver
    grid: StateGrid


def projected_indices(grid: np.ndarray, policy: np.ndarray) -> np.ndarray:
    """Round each policy value down to the grid (monotone in the state)."""
    idx = np.searchsorted(grid, policy + SNAP_TOL, side="right") - 1
    return np.clip(idx, 0, len(grid) - 1)


def grid_policy_map(grid: np.ndarray, proj: np.ndarray, name: str) -> MonotoneMap:
    """``f(x, z) = grid[proj[i(x), z]]`` where ``i(x)`` rounds ``x`` down to the grid."""
    grid = np.asarray(grid, dtype=float)
    n = len(grid)
    out = grid[proj]
    lookup = {float(x): i for i, x in enumerate(grid)}

    def func(x, v):
        x = np.asarray(x, dtype=float)
        i = np.clip(np.searchsorted(grid, x + SNAP_TOL, side="right") - 1, 0, n - 1)
        return out[i, np.asarray(v).astype(np.int64)]

    def scalar(x, v):
        i = lookup.get(x)
        if i is None:
            i = min(max(int(np.searchsorted(grid, x + SNAP_TOL, side="right")) - 1, 0), n - 1)
        return float(out[i, int(v)])

    return MonotoneMap(func, scalar=scalar, shock_values=tuple(range(proj.shape[1])), name=name,
                       interval=(float(grid[0]), float(grid[-1])))


def compile_policy(sol: PolicySolution, atom: int = 0) -> SrsModel:
    proj = projected_indices(sol.grid, sol.policy)
    fmap = grid_policy_map(sol.grid, proj, sol.model)
    driver = markov_atom_driver(sol.transition.tolist(), atom, backend="float")
    return SrsModel(fmap, driver, StateGrid(sol.grid.tolist()))
