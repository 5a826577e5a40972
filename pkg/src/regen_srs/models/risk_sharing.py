"""Two-agent risk sharing under limited commitment.

Agent 1 receives ``y`` and agent 2 ``Y - y``. Efficient self-enforcing
arrangements keep agent 1's consumption inside a state-dependent interval
``[lo_y, hi_y]``: last period's consumption carries over unless it falls
outside the new state's interval, in which case it is clamped to the nearest
end. Writing the shock as next period's endowment state gives the recursion
``c_{t+1} = clip(c_t, lo_xi, hi_xi)``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from ..drivers import RegenDriver, markov_atom_driver
from ..errors import ConvergenceError, ValidationError
from ..ordered import MonotoneMap, StateGrid
from .common import SrsModel, check_transition, crra


@dataclass(frozen=True)
class RiskSharingSpec:
    beta: float
    Y: float
    endowments: tuple
    transition: tuple
    gamma: float = 2.0
    intervals: tuple | None = None

    def __post_init__(self):
        y = np.asarray(self.endowments, dtype=float)
        if not (0 < self.beta < 1) or self.Y <= 0 or self.gamma <= 0:
            raise ValidationError("need 0 < beta < 1, Y > 0 and gamma > 0")
        if len(y) < 2 or np.any(y <= 0) or np.any(y >= self.Y):
            raise ValidationError("endowments must lie in (0, Y) with at least two states")
        P = check_transition(self.transition)
        if P.shape[0] != len(y):
            raise ValidationError("transition size does not match endowments")
        object.__setattr__(self, "endowments", tuple(float(v) for v in y))
        object.__setattr__(self, "transition", tuple(tuple(r) for r in P.tolist()))
        if self.intervals is not None:
            iv = np.asarray(self.intervals, dtype=float)
            if iv.shape != (len(y), 2):
                raise ValidationError("intervals must be one [lo, hi] pair per endowment state")
            if np.any(iv[:, 0] > iv[:, 1]) or np.any(iv <= 0) or np.any(iv >= self.Y):
                raise ValidationError("each interval needs 0 < lo <= hi < Y")
            object.__setattr__(self, "intervals", tuple(tuple(r) for r in iv.tolist()))

    def with_intervals(self, intervals) -> "RiskSharingSpec":
        return RiskSharingSpec(self.beta, self.Y, self.endowments, self.transition, self.gamma,
                               tuple(map(tuple, intervals)))

    @classmethod
    def from_json(cls, doc: dict) -> "RiskSharingSpec":
        iv = doc.get("intervals")
        return cls(beta=doc["beta"], Y=doc["Y"], endowments=tuple(doc["endowments"]),
                   transition=tuple(map(tuple, doc["transition"])), gamma=doc.get("gamma", 2.0),
                   intervals=None if iv is None else tuple(map(tuple, iv)))

    def to_json(self) -> dict:
        doc = {"kind": "risksharing", "beta": self.beta, "Y": self.Y, "endowments": list(self.endowments),
               "transition": [list(r) for r in self.transition], "gamma": self.gamma}
        if self.intervals is not None:
            doc["intervals"] = [list(r) for r in self.intervals]
        return doc


class RiskSharingSystem(NamedTuple):
    fmap: MonotoneMap
    driver: RegenDriver
    c_min: float
    c_max: float
    first_best: bool
    c_split: float
    lo: np.ndarray
    hi: np.ndarray

    @property
    def grid(self) -> StateGrid:
        """All interval end-points; closed under every clamp."""
        return StateGrid(sorted(set(self.lo.tolist()) | set(self.hi.tolist())))


def clamp_map(lo, hi) -> MonotoneMap:
    """``f(c, xi) = min(max(c, lo[xi]), hi[xi])`` with ``xi`` a state index."""
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    lo_l, hi_l = lo.tolist(), hi.tolist()

    def func(c, v):
        i = np.asarray(v).astype(np.int64)
        return np.minimum(np.maximum(c, lo[i]), hi[i])

    def scalar(c, v):
        i = int(v)
        return min(max(c, lo_l[i]), hi_l[i])

    return MonotoneMap(func, scalar=scalar, shock_values=tuple(range(len(lo))), name="clamp",
                       interval=(float(lo.min()), float(hi.max())))


def risk_sharing_map(spec: RiskSharingSpec, atom: int = 0) -> RiskSharingSystem:
    """Clamp recursion, endowment-chain driver and the quantities behind the mixing argument.

    The environment state at ``t`` is the endowment state of ``t + 1``; its
    shock is that state's index.
    """
    if spec.intervals is None:
        spec = spec.with_intervals(solve_intervals(spec))
    iv = np.asarray(spec.intervals, dtype=float)
    lo, hi = iv[:, 0], iv[:, 1]
    c_min, c_max = float(hi.min()), float(lo.max())
    first_best = bool(lo.max() <= hi.min())
    driver = markov_atom_driver([list(r) for r in spec.transition], atom, backend="float")
    return RiskSharingSystem(clamp_map(lo, hi), driver, c_min, c_max, first_best,
                             0.5 * (c_min + c_max), lo, hi)


def compile_risk_sharing(spec: RiskSharingSpec) -> SrsModel:
    rs = risk_sharing_map(spec)
    return SrsModel(rs.fmap, rs.driver, rs.grid)


def autarky_values(spec: RiskSharingSpec):
    """Discounted autarky utilities of both agents by endowment state."""
    u, _ = crra(spec.gamma)
    y = np.asarray(spec.endowments)
    M = np.eye(len(y)) - spec.beta * np.asarray(spec.transition)
    return np.linalg.solve(M, u(y)), np.linalg.solve(M, u(spec.Y - y))


def arrangement_values(spec: RiskSharingSpec, lo, hi, c: float, state: int):
    """Both agents' values when agent 1 consumes ``c`` now in ``state`` and the clamp rule runs on.

    The consumption levels reachable from ``c`` are ``c`` itself and the
    interval end-points, so the values solve one finite linear system.
    """
    u, _ = crra(spec.gamma)
    P = np.asarray(spec.transition)
    n = len(P)
    levels = np.concatenate([[c], lo, hi])
    m = len(levels)
    # node (j, s): consumption levels[j] in state s
    nxt = np.clip(levels[:, None], lo[None, :], hi[None, :])
    idx = np.array([[int(np.flatnonzero(levels == nxt[j, s])[0]) for s in range(n)] for j in range(m)])
    T = np.zeros((m * n, m * n))
    for j in range(m):
        for s in range(n):
            for s2 in range(n):
                T[j * n + s, idx[j, s2] * n + s2] += P[s, s2]
    cons = np.repeat(levels, n)
    A = np.eye(m * n) - spec.beta * T
    v1 = np.linalg.solve(A, u(cons))
    v2 = np.linalg.solve(A, u(spec.Y - cons))
    return v1[state], v2[state]


def solve_intervals(spec: RiskSharingSpec, tol: float = 1e-10, max_iter: int = 500):
    """Interval end-points by iteration from the widest candidate intervals.

    Each sweep recomputes ``lo_y`` as the consumption at which agent 1's
    participation constraint binds and ``hi_y`` as the one at which agent 2's
    binds, holding the other end-points fixed (bisection on each value, which
    is monotone in current consumption).
    """
    aut1, aut2 = autarky_values(spec)
    y = np.asarray(spec.endowments)
    n = len(y)
    eps = 1e-9 * spec.Y
    lo = np.full(n, eps)
    hi = np.full(n, spec.Y - eps)
    for it in range(max_iter):
        new_lo = np.empty(n)
        new_hi = np.empty(n)
        for s in range(n):
            new_lo[s] = _bisect(lambda c: arrangement_values(spec, lo, hi, c, s)[0] - aut1[s],
                                eps, y[s], increasing=True, tol=tol)
            new_hi[s] = _bisect(lambda c: arrangement_values(spec, lo, hi, c, s)[1] - aut2[s],
                                y[s], spec.Y - eps, increasing=False, tol=tol)
        step = max(np.max(np.abs(new_lo - lo)), np.max(np.abs(new_hi - hi)))
        lo, hi = new_lo, new_hi
        if step < tol:
            return np.column_stack([lo, hi]).tolist()
    raise ConvergenceError("interval iteration did not settle", float(step))


def _bisect(g, a, b, increasing: bool, tol: float):
    """Boundary of ``{c : g(c) >= 0}`` inside ``[a, b]``; ``b`` (or ``a``) satisfies it."""
    for _ in range(200):
        if b - a <= tol * 1e-2:
            break
        m = 0.5 * (a + b)
        ok = g(m) >= 0
        if increasing:
            b, a = (m, a) if ok else (b, m)
        else:
            a, b = (m, b) if ok else (a, m)
    return b if increasing else a
