"""Income fluctuation (precautionary savings) model with a borrowing limit.

An agent with CRRA utility ``u(c) = c^(1-gamma)/(1-gamma)`` chooses next-period
assets ``a+ >= a_lower`` subject to ``c + a+/R = a + e``; the endowment ``e``
follows a finite Markov chain with strictly positive transitions.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from ..errors import ConvergenceError, ValidationError
from .common import (PolicySolution, bisect_increasing, check_transition, compile_policy, crra,
                     golden_max, interp_columns, projected_indices)

C_FLOOR = 1e-10


def asset_grid(a_lower: float, a_max: float, n: int) -> np.ndarray:
    """Geometrically spaced nodes, dense near the borrowing limit."""
    g = a_lower - 1.0 + np.geomspace(1.0, a_max - a_lower + 1.0, n)
    g[0], g[-1] = a_lower, a_max
    return g


@dataclass(frozen=True)
class HuggettSpec:
    gamma: float
    beta: float
    R: float
    endowments: tuple
    transition: tuple
    a_lower: float
    a_max: float = 10.0
    n_grid: int = 500

    def __post_init__(self):
        e = np.asarray(self.endowments, dtype=float)
        if not self.gamma > 1:
            raise ValidationError("gamma must exceed 1")
        if not (0 < self.beta < 1 / self.R):
            raise ValidationError("need 0 < beta < 1/R")
        if len(e) < 2 or np.any(np.diff(e) < 0) or e[-1] <= e[0] or e[0] <= 0:
            raise ValidationError("endowments must be positive, nondecreasing, with e_n > e_1")
        P = check_transition(self.transition)
        if P.shape[0] != len(e):
            raise ValidationError("transition size does not match endowments")
        if not self.a_lower < 0:
            raise ValidationError("a_lower must be negative")
        if not (self.a_lower + e[0] - self.a_lower / self.R > 0):
            raise ValidationError("borrowing limit violates a_lower + e_1 - a_lower/R > 0")
        if not (self.a_max > self.a_lower) or self.n_grid < 3:
            raise ValidationError("grid needs a_max > a_lower and at least 3 nodes")
        object.__setattr__(self, "endowments", tuple(float(x) for x in e))
        object.__setattr__(self, "transition", tuple(tuple(r) for r in P.tolist()))

    @property
    def grid(self) -> np.ndarray:
        return asset_grid(self.a_lower, self.a_max, self.n_grid)

    @classmethod
    def from_json(cls, doc: dict) -> "HuggettSpec":
        return cls(gamma=doc["gamma"], beta=doc["beta"], R=doc["R"], endowments=tuple(doc["endowments"]),
                   transition=tuple(map(tuple, doc["transition"])), a_lower=doc["a_lower"],
                   a_max=doc.get("a_max", 10.0), n_grid=doc.get("n_grid", 500))

    def to_json(self) -> dict:
        return {"kind": "huggett", "gamma": self.gamma, "beta": self.beta, "R": self.R,
                "endowments": list(self.endowments), "transition": [list(r) for r in self.transition],
                "a_lower": self.a_lower, "a_max": self.a_max, "n_grid": self.n_grid}


def _upper(a, e, spec, a_max):
    # keep consumption strictly positive and stay on the grid
    return np.minimum(a_max, spec.R * (a + e - C_FLOOR))


def solve_huggett(spec: HuggettSpec, tol: float = 1e-8, max_iter: int = 5000,
                  howard: int = 50, policy_tol: float = 1e-10) -> PolicySolution:
    """Modified value iteration, then Euler-equation time iteration to polish the policy.

    Raises :class:`ConvergenceError` when either stage misses its tolerance.
    """
    u, du = crra(spec.gamma)
    grid = spec.grid
    e = np.asarray(spec.endowments)
    P = np.asarray(spec.transition)
    A, E = np.meshgrid(grid, e, indexing="ij")
    lo = np.full_like(A, spec.a_lower)
    hi = _upper(A, E, spec, grid[-1])
    beta, R = spec.beta, spec.R

    def q(V):
        return V @ P.T  # EV[i, z] = sum_z+ P[z, z+] V[i, z+]

    def cont(EV, ap):
        return np.stack([np.interp(ap[:, z], grid, EV[:, z]) for z in range(len(e))], axis=1)

    def objective(EV):
        return lambda ap: u(np.maximum(A + E - ap / R, C_FLOOR)) + beta * cont(EV, ap)

    V = u(A + E - spec.a_lower / R) / (1 - beta)
    history = []
    it = 0
    for it in range(1, max_iter + 1):
        pol = golden_max(objective(q(V)), lo, hi)
        TV = objective(q(V))(pol)
        diff = float(np.max(np.abs(TV - V)))
        history.append(diff)
        V = TV
        if diff < tol:
            break
        for _ in range(howard):
            V = objective(q(V))(pol)
    else:
        raise ConvergenceError(f"value iteration stopped after {max_iter} sweeps", history[-1])

    pol = _time_iteration(spec, grid, A, E, lo, hi, pol, du, policy_tol, max_iter)
    V = _evaluate(pol, V, objective, q, tol, max_iter)
    c = A + E - pol / R
    return PolicySolution("huggett", grid, e, P, V, pol, c, history, it, huggett_euler(spec, grid, pol), spec)


def _time_iteration(spec, grid, A, E, lo, hi, pol, du, tol, max_iter):
    P = np.asarray(spec.transition)
    beta, R = spec.beta, spec.R
    for _ in range(max_iter):
        c = A + E - pol / R

        def g(ap):
            mu_next = du(np.maximum(interp_columns(grid, c, ap), C_FLOOR))
            return du(np.maximum(A + E - ap / R, C_FLOOR)) - beta * R * np.einsum("izk,zk->iz", mu_next, P)

        new = bisect_increasing(g, lo, hi)
        step = float(np.max(np.abs(new - pol)))
        pol = new
        if step < tol:
            return pol
    raise ConvergenceError("Euler time iteration did not settle", step)


def _evaluate(pol, V, objective, q, tol, max_iter):
    for _ in range(max_iter * 10):
        TV = objective(q(V))(pol)
        if float(np.max(np.abs(TV - V))) < tol:
            return TV
        V = TV
    raise ConvergenceError("policy evaluation did not converge", float(np.max(np.abs(TV - V))))


def huggett_euler(spec: HuggettSpec, grid, pol) -> np.ndarray:
    """Relative Euler residual ``1 - beta R E[u'(c+)] / u'(c)``; NaN where the limit binds."""
    _, du = crra(spec.gamma)
    e = np.asarray(spec.endowments)
    P = np.asarray(spec.transition)
    A, E = np.meshgrid(grid, e, indexing="ij")
    c = A + E - pol / spec.R
    mu_next = du(interp_columns(grid, c, pol))
    res = 1.0 - spec.beta * spec.R * np.einsum("izk,zk->iz", mu_next, P) / du(c)
    interior = (pol > spec.a_lower + 1e-9) & (pol < grid[-1] - 1e-9)
    return np.where(interior, res, np.nan)


def budget_gap(sol: PolicySolution) -> float:
    """Largest violation of ``c + a+/R = a + e`` over the grid."""
    A, E = np.meshgrid(sol.grid, sol.shocks, indexing="ij")
    return float(np.max(np.abs(sol.consumption + sol.policy / sol.spec.R - (A + E))))


def lemma_descent_scan(sol: PolicySolution) -> list:
    """Grid points ``a > a_lower`` where no endowment lowers assets (should be empty)."""
    a = sol.grid[1:]
    bad = np.min(sol.policy[1:], axis=1) >= a
    return a[bad].tolist()


def eventual_descent_point(sol: PolicySolution):
    """Smallest grid ``a_hat`` with ``f(a, e) < a`` for every ``a > a_hat`` and every ``e``."""
    ok = np.max(sol.policy, axis=1) < sol.grid
    for i in range(len(sol.grid) - 1, -1, -1):
        if not ok[i]:
            return float(sol.grid[i])
    return float(sol.grid[0])


class HuggettBounds(NamedTuple):
    a_bar: float
    c: float
    down_states: list
    down_path: list
    up_states: list
    up_path: list


def huggett_bounds(sol: PolicySolution, c: float | None = None) -> HuggettBounds:
    """Upper end ``a_bar`` of the ergodic set and two mixing witness sequences.

    ``a_bar`` is the smallest grid point with ``max_e f(a, e) <= a``. From
    ``a_bar`` the lowest-saving endowment is applied until assets fall below
    ``c``; from the borrowing limit the highest-saving endowment is applied
    until they rise above it. Both use the grid-projected policy, and each
    step must move at least one cell.
    """
    grid = sol.grid
    proj = projected_indices(grid, sol.policy)
    hits = np.flatnonzero(np.max(sol.policy, axis=1) <= grid + 1e-12)
    if hits.size == 0:
        raise ValidationError("a_bar not found on the grid; enlarge a_max")
    ib = int(hits[0])
    a_bar = float(grid[ib])
    if c is None:
        c = 0.5 * (grid[0] + a_bar)
    down_states, down_path = [], [ib]
    i = ib
    while grid[i] >= c and ib > 0:
        z = int(np.argmin(proj[i]))
        j = int(proj[i, z])
        if j >= i:
            raise ValidationError(f"downward witness stalls at a = {grid[i]:.6g}; refine the grid")
        down_states.append(z)
        down_path.append(j)
        i = j
    up_states, up_path = [], [0]
    i = 0
    while grid[i] <= c and ib > 0:
        z = int(np.argmax(proj[i]))
        j = int(proj[i, z])
        if j <= i:
            raise ValidationError(f"upward witness stalls at a = {grid[i]:.6g}; refine the grid")
        up_states.append(z)
        up_path.append(j)
        i = j
    return HuggettBounds(a_bar, float(c), down_states, [float(grid[k]) for k in down_path],
                         up_states, [float(grid[k]) for k in up_path])


def compile_huggett(sol: PolicySolution):
    return compile_policy(sol)
