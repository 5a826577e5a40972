"""One-sector stochastic optimal growth with Markov productivity.

Output is ``phi(k, z) = z k^alpha + (1 - delta) k``; the planner splits it into
consumption and next-period capital. Utility is CRRA with ``sigma == 1`` meaning
log. Capital lives on ``[k_lower, k_max]``, where ``k_max`` is the point beyond
which output falls short of the capital stock in every state.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from ..errors import ConvergenceError, ValidationError
from .common import (PolicySolution, bisect_increasing, check_transition, compile_policy, crra,
                     golden_max, interp_columns)

C_FLOOR = 1e-12


@dataclass(frozen=True)
class GrowthSpec:
    """Model primitives.

    With ``strict`` the spec must carry two productivity states with equal
    transition rows (the second state having lower output), and output at the
    grid bottom must exceed ``k_lower`` in some state. ``strict=False`` admits
    degenerate cases such as a single deterministic state.
    """

    beta: float
    alpha: float
    shocks: tuple
    transition: tuple
    sigma: float = 1.0
    delta: float = 1.0
    k_lower: float | None = None
    n_grid: int = 500
    strict: bool = True

    def __post_init__(self):
        z = np.asarray(self.shocks, dtype=float)
        if not (0 < self.beta < 1):
            raise ValidationError("beta must lie in (0, 1)")
        if not (0 < self.alpha < 1) or not (0 < self.delta <= 1):
            raise ValidationError("need 0 < alpha < 1 and 0 < delta <= 1")
        if self.sigma <= 0:
            raise ValidationError("sigma must be positive")
        if np.any(z <= 0):
            raise ValidationError("productivity levels must be positive")
        P = check_transition(self.transition)
        if P.shape[0] != len(z):
            raise ValidationError("transition size does not match shocks")
        object.__setattr__(self, "shocks", tuple(float(x) for x in z))
        object.__setattr__(self, "transition", tuple(tuple(r) for r in P.tolist()))
        if self.k_lower is None:
            object.__setattr__(self, "k_lower", 1e-3 * self.k_max)
        if not (0 < self.k_lower < self.k_max) or self.n_grid < 3:
            raise ValidationError("need 0 < k_lower < k_max and at least 3 nodes")
        if self.strict:
            if not np.any(self.phi(self.k_lower, z) > self.k_lower):
                raise ValidationError("output at the grid bottom must exceed k_lower for some state")
            if self.ordered_pair() is None:
                raise ValidationError("need two states with equal transition rows and different output")

    @property
    def k_max(self) -> float:
        # z_max k^alpha + (1 - delta) k = k
        return float((max(self.shocks) / self.delta) ** (1.0 / (1.0 - self.alpha)))

    @property
    def grid(self) -> np.ndarray:
        return np.linspace(self.k_lower, self.k_max, self.n_grid)

    def phi(self, k, z):
        return z * k**self.alpha + (1.0 - self.delta) * k

    def phi_k(self, k, z):
        return self.alpha * z * k ** (self.alpha - 1.0) + (1.0 - self.delta)

    def ordered_pair(self):
        """``(hi, lo)`` state indices with equal transition rows and ``z_hi > z_lo``, or None."""
        P = np.asarray(self.transition)
        n = len(self.shocks)
        for i in range(n):
            for j in range(n):
                if self.shocks[i] > self.shocks[j] and np.allclose(P[i], P[j], rtol=0, atol=1e-15):
                    return i, j
        return None

    @classmethod
    def from_json(cls, doc: dict) -> "GrowthSpec":
        return cls(beta=doc["beta"], alpha=doc["alpha"], shocks=tuple(doc["shocks"]),
                   transition=tuple(map(tuple, doc["transition"])), sigma=doc.get("sigma", 1.0),
                   delta=doc.get("delta", 1.0), k_lower=doc.get("k_lower"), n_grid=doc.get("n_grid", 500),
                   strict=doc.get("strict", True))

    def to_json(self) -> dict:
        return {"kind": "growth", "beta": self.beta, "alpha": self.alpha, "shocks": list(self.shocks),
                "transition": [list(r) for r in self.transition], "sigma": self.sigma,
                "delta": self.delta, "k_lower": self.k_lower, "n_grid": self.n_grid, "strict": self.strict}


def solve_growth(spec: GrowthSpec, tol: float = 1e-8, max_iter: int = 5000,
                 howard: int = 50, policy_tol: float = 1e-12) -> PolicySolution:
    """Modified value iteration, then Euler-equation time iteration to polish the policy."""
    u, du = crra(spec.sigma)
    grid = spec.grid
    z = np.asarray(spec.shocks)
    P = np.asarray(spec.transition)
    K, Z = np.meshgrid(grid, z, indexing="ij")
    Y = spec.phi(K, Z)
    lo = np.full_like(K, grid[0])
    hi = np.minimum(grid[-1], Y - C_FLOOR)
    if np.any(hi < lo):
        raise ValidationError("output at the grid bottom cannot cover k_lower")
    beta = spec.beta

    def cont(EV, kp):
        return np.stack([np.interp(kp[:, j], grid, EV[:, j]) for j in range(len(z))], axis=1)

    def objective(V):
        EV = V @ P.T
        return lambda kp: u(np.maximum(Y - kp, C_FLOOR)) + beta * cont(EV, kp)

    V = u(np.maximum(Y - lo, C_FLOOR)) / (1 - beta)
    history = []
    it = 0
    for it in range(1, max_iter + 1):
        obj = objective(V)
        pol = golden_max(obj, lo, hi)
        TV = obj(pol)
        diff = float(np.max(np.abs(TV - V)))
        history.append(diff)
        V = TV
        if diff < tol:
            break
        for _ in range(howard):
            V = objective(V)(pol)
    else:
        raise ConvergenceError(f"value iteration stopped after {max_iter} sweeps", history[-1])

    step = np.inf
    for _ in range(max_iter):
        c = Y - pol

        def g(kp):
            mu = du(np.maximum(interp_columns(grid, c, kp), C_FLOOR)) * spec.phi_k(kp[..., None], z)
            return du(np.maximum(Y - kp, C_FLOOR)) - beta * np.einsum("izk,zk->iz", mu, P)

        new = bisect_increasing(g, lo, hi)
        step = float(np.max(np.abs(new - pol)))
        pol = new
        if step < policy_tol:
            break
    else:
        raise ConvergenceError("Euler time iteration did not settle", step)

    for _ in range(10 * max_iter):
        TV = objective(V)(pol)
        if float(np.max(np.abs(TV - V))) < tol:
            break
        V = TV
    return PolicySolution("growth", grid, z, P, TV, pol, Y - pol, history, it,
                          growth_euler(spec, grid, pol), spec)


def growth_euler(spec: GrowthSpec, grid, pol) -> np.ndarray:
    """Relative residual ``1 - beta E[u'(c+) phi_k(k+, z+)] / u'(c)``; NaN at bound nodes."""
    _, du = crra(spec.sigma)
    z = np.asarray(spec.shocks)
    P = np.asarray(spec.transition)
    K, Z = np.meshgrid(grid, z, indexing="ij")
    c = spec.phi(K, Z) - pol
    mu = du(interp_columns(grid, c, pol)) * spec.phi_k(pol[..., None], z)
    res = 1.0 - spec.beta * np.einsum("izk,zk->iz", mu, P) / du(c)
    interior = (pol > grid[0] + 1e-9) & (pol < grid[-1] - 1e-9)
    return np.where(interior, res, np.nan)


def closed_form_policy(spec: GrowthSpec, k, z):
    """``alpha beta z k^alpha``: the optimal policy under log utility and full depreciation."""
    return spec.alpha * spec.beta * z * np.asarray(k) ** spec.alpha


class GrowthInterval(NamedTuple):
    k_prime: float
    k_double_prime: float
    lemma_failures: list


def growth_interval(sol: PolicySolution) -> GrowthInterval:
    """Grid versions of ``k''`` (first point where no state grows capital) and ``k'``.

    ``k'`` is the largest grid point below ``k''`` at which the lowest-saving
    state does not shrink capital (the grid bottom if none). Grid points above
    ``k'`` where every state keeps capital from falling are reported in
    ``lemma_failures``; the list should be empty.
    """
    if len(sol.shocks) < 2:
        raise ValidationError("k' < k'' needs at least two productivity states")
    grid, f = sol.grid, sol.policy
    hits = np.flatnonzero(np.max(f, axis=1) <= grid)
    if hits.size == 0:
        raise ValidationError("k'' not found on the grid; raise the grid bound")
    i2 = int(hits[0])
    low = np.min(f, axis=1)
    below = np.flatnonzero(low[: i2 + 1] >= grid[: i2 + 1])
    i1 = int(below[-1]) if below.size else 0
    if i1 >= i2:
        raise ValidationError("degenerate interval: k' equals k''")
    fails = grid[i1 + 1:][low[i1 + 1:] >= grid[i1 + 1:]]
    return GrowthInterval(float(grid[i1]), float(grid[i2]), fails.tolist())


def compile_growth(sol: PolicySolution):
    return compile_policy(sol)
