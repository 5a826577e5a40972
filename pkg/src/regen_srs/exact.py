"""Exact analysis of finite monotone recursions in a regenerative environment.

For a grid-closed map, finite shock laws and a finite (or Markov-atom) cycle
law this module computes, in rational or float arithmetic,

* the transition matrix of the chain observed at regeneration times,
* its stationary law,
* the time-average limiting law of the recursion (a length-biased average of
  within-cycle positions started from the stationary law),
* the one-cycle splitting probabilities from the top and bottom states.

Cycle laws given by enumeration are handled by pushing distributions through
each cycle. Markov-atom drivers are handled without truncation: the excursion
from the atom is an absorbing chain on ``grid x (non-atom states)``, solved by
one linear system.
"""
from __future__ import annotations

import io
import itertools
import json
from dataclasses import dataclass
from fractions import Fraction
from math import lcm

import numpy as np
from scipy.sparse.csgraph import connected_components

from .drivers import RegenDriver, encode_json
from .errors import (AmbiguousStationaryError, BudgetExceededError, GridClosureError,
                     TailMassError, ValidationError)
from .ordered import DiscreteCdf, MonotoneMap, StateGrid, as_number, uniform_distance

DEFAULT_WORK_BUDGET = 10**7
# dense float work runs in LAPACK, so it gets a larger allowance
FLOAT_WORK_BUDGET = 10**10


def _zero(backend):
    return Fraction(0) if backend == "rational" else 0.0


def _one(backend):
    return Fraction(1) if backend == "rational" else 1.0


def _zeros(shape, backend):
    if backend == "rational":
        out = np.empty(shape, dtype=object)
        out.fill(Fraction(0))
        return out
    return np.zeros(shape)


def _eye(n, backend):
    out = _zeros((n, n), backend)
    for i in range(n):
        out[i, i] = _one(backend)
    return out


# -- linear algebra -------------------------------------------------------------

def _bareiss_solve(A, B):
    """Solve ``A X = B`` over the rationals by fraction-free elimination."""
    n = len(A)
    k = len(B[0]) if n else 0
    rows = []
    for i in range(n):
        entries = [Fraction(x) for x in A[i]] + [Fraction(x) for x in B[i]]
        scale = lcm(*[e.denominator for e in entries]) if entries else 1
        rows.append([int(e * scale) for e in entries])
    prev = 1
    for c in range(n):
        piv = next((r for r in range(c, n) if rows[r][c] != 0), None)
        if piv is None:
            raise ValidationError("singular linear system")
        if piv != c:
            rows[c], rows[piv] = rows[piv], rows[c]
        pc = rows[c][c]
        for r in range(c + 1, n):
            rc = rows[r][c]
            row_r, row_c = rows[r], rows[c]
            for j in range(c + 1, n + k):
                row_r[j] = (row_r[j] * pc - rc * row_c[j]) // prev
            row_r[c] = 0
        prev = pc
    X = [[Fraction(0)] * k for _ in range(n)]
    for col in range(k):
        for i in range(n - 1, -1, -1):
            acc = Fraction(rows[i][n + col])
            for j in range(i + 1, n):
                if rows[i][j]:
                    acc -= rows[i][j] * X[j][col]
            X[i][col] = acc / rows[i][i]
    return X


def solve_linear(A, B, backend="float"):
    """Solve ``A X = B``; ``B`` is a list of rows (or a 2-D array)."""
    if backend == "rational":
        return _bareiss_solve([list(r) for r in A], [list(r) for r in B])
    X = np.linalg.solve(np.asarray(A, dtype=float), np.asarray(B, dtype=float))
    return X.tolist()


def _solve_matrix(A, B, backend):
    X = solve_linear(A, B, backend)
    out = _zeros((len(X), len(X[0]) if X else 0), backend)
    for i, row in enumerate(X):
        out[i, :] = row
    return out


# -- data types -----------------------------------------------------------------

def _fmt(x):
    if isinstance(x, Fraction):
        return str(x)
    return repr(float(x))


@dataclass(frozen=True, eq=False)
class EmbeddedChain:
    """Transition matrix of ``Y_n = X_{T_n}`` on a grid."""

    grid: StateGrid
    matrix: np.ndarray

    @property
    def backend(self):
        return self.grid.backend

    def row(self, x) -> DiscreteCdf:
        return DiscreteCdf(self.grid, list(self.matrix[self.grid.index(x)]))

    def power_row(self, x, k: int) -> DiscreteCdf:
        """Law of ``Y_k`` given ``Y_0 = x``."""
        v = _zeros(len(self.grid), self.backend)
        v[self.grid.index(x)] = _one(self.backend)
        for _ in range(k):
            v = v @ self.matrix
        return DiscreteCdf(self.grid, list(v))

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write("x," + ",".join(_fmt(p) for p in self.grid.points) + "\n")
        for x, row in zip(self.grid.points, self.matrix):
            buf.write(_fmt(x) + "," + ",".join(_fmt(p) for p in row) + "\n")
        return buf.getvalue()

    def to_json(self) -> dict:
        return encode_json({"grid": list(self.grid.points),
                            "matrix": [list(r) for r in self.matrix]})


@dataclass(frozen=True, eq=False)
class StationaryLaw:
    grid: StateGrid
    pi: np.ndarray
    transient: tuple = ()

    def as_cdf(self) -> DiscreteCdf:
        return DiscreteCdf(self.grid, list(self.pi))

    def to_json(self) -> dict:
        return encode_json({"grid": list(self.grid.points), "pi": list(self.pi),
                            "transient": [self.grid.points[i] for i in self.transient]})


def _plain_number(x):
    return x if isinstance(x, Fraction) else float(x)


def law_to_csv(grid: StateGrid, mass) -> str:
    return DiscreteCdf(grid, list(mass)).to_csv()


def dumps_exact(doc) -> str:
    return json.dumps(doc, indent=1, sort_keys=True) + "\n"


# -- one-step kernels -------------------------------------------------------------

def step_matrices(fmap: MonotoneMap, driver: RegenDriver, grid: StateGrid):
    """``S[z][i, j] = P(f(x_i, xi^z) = x_j)``; checks that ``f`` maps the grid into itself."""
    backend = grid.backend
    n = len(grid)
    mats = []
    for z, law in enumerate(driver.shock_laws):
        S = _zeros((n, n), backend)
        for v, p in zip(law.values, law.probs):
            v = as_number(v, backend)
            p = as_number(p, backend)
            for i, x in enumerate(grid.points):
                y = fmap(x, v)
                j = grid.lookup(y)
                if j is None:
                    raise GridClosureError(
                        f"f({x}, {v}) = {y} is not a grid point (environment state "
                        f"{driver.labels[z]!r})", witness=(driver.labels[z], x, v, y))
                S[i, j] += p
        mats.append(S)
    return mats


def _cycle_list(driver: RegenDriver, backend, tail_tol):
    if not driver.has_enumeration:
        raise ValidationError("driver has no exact cycle enumeration")
    tail = driver.tail_mass
    if tail != 0 and (tail_tol is None or float(tail) > tail_tol):
        raise TailMassError(f"cycle enumeration misses probability {tail}")
    cycles = [(as_number(p, backend), s) for p, s in driver._enumeration]
    return cycles, _one(backend) - as_number(tail, backend)


def _check_budget(work, budget, backend="rational"):
    if budget is None:
        budget = FLOAT_WORK_BUDGET if backend == "float" else DEFAULT_WORK_BUDGET
    if work > budget:
        raise BudgetExceededError(f"exact computation needs ~{work:.3g} operations, budget {budget:.3g}")


def _transition(driver, backend):
    return [[as_number(p, backend) for p in row] for row in driver.transition]


def _atom_blocks(S, driver, backend):
    """Block matrices of the excursion chain on ``grid x (non-atom states)``."""
    a = driver.atom
    p = _transition(driver, backend)
    others = [z for z in range(driver.n_states) if z != a]
    n = S[0].shape[0]
    m = len(others)
    B = _zeros((n, n * m), backend)
    Q = _zeros((n * m, n * m), backend)
    C = _zeros((n * m, n), backend)
    for k, zk in enumerate(others):
        B[:, k * n:(k + 1) * n] = S[a] * p[a][zk]
        C[k * n:(k + 1) * n, :] = S[zk] * p[zk][a]
        for l, zl in enumerate(others):
            Q[k * n:(k + 1) * n, l * n:(l + 1) * n] = S[zk] * p[zk][zl]
    return S[a] * p[a][a], B, Q, C, m


# -- public operations --------------------------------------------------------------

def embedded_matrix(fmap: MonotoneMap, driver: RegenDriver, grid: StateGrid,
                    work_budget: int | None = None, tail_tol=None) -> EmbeddedChain:
    """Exact transition matrix of the recursion sampled at regeneration times.

    Entry ``(i, j)`` is the probability that one full cycle carries ``x_i`` to
    ``x_j``, summed over cycle types and shock sequences. ``tail_tol`` admits a
    truncated enumeration (float backend) and renormalizes by the enumerated mass.
    """
    backend = grid.backend
    S = step_matrices(fmap, driver, grid)
    n = len(grid)
    if driver.kind == "atom":
        direct, B, Q, C, m = _atom_blocks(S, driver, backend)
        _check_budget((n * m) ** 3, work_budget, backend)
        if m == 0:
            return EmbeddedChain(grid, direct)
        X = _solve_matrix(_eye(n * m, backend) - Q, C, backend)
        return EmbeddedChain(grid, direct + B @ X)
    cycles, covered = _cycle_list(driver, backend, tail_tol)
    _check_budget(sum(len(s) for _, s in cycles) * n * n, work_budget, backend)
    P = _zeros((n, n), backend)
    for p, states in cycles:
        M = S[states[0]]
        for z in states[1:]:
            M = M @ S[z]
        P = P + M * p
    if covered != 1:
        P = P / covered
    return EmbeddedChain(grid, P)


def transition_terms(fmap: MonotoneMap, driver: RegenDriver, grid: StateGrid, x_from, x_to,
                     work_budget: int | None = None):
    """Brute-force decomposition of one embedded transition probability.

    Enumerates every cycle type and every shock tuple along it; returns the
    terms ``(cycle_states, shocks, probability)`` that carry ``x_from`` to
    ``x_to``. Cost is exponential in the cycle length.
    """
    backend = grid.backend
    cycles, _ = _cycle_list(driver, backend, None)
    work = sum(np.prod([len(driver.shock_laws[z].values) for z in s], dtype=float) for _, s in cycles)
    _check_budget(work, work_budget)
    target = grid.index(x_to)
    x0 = grid.points[grid.index(x_from)]
    terms = []
    for p, states in cycles:
        laws = [driver.shock_laws[z] for z in states]
        for combo in itertools.product(*[range(len(law.values)) for law in laws]):
            prob = p
            x = x0
            shocks = []
            for law, k in zip(laws, combo):
                v = as_number(law.values[k], backend)
                prob = prob * as_number(law.probs[k], backend)
                x = fmap(x, v)
                shocks.append(v)
            if prob != 0 and grid.lookup(x) == target:
                terms.append((tuple(driver.labels[z] for z in states), tuple(shocks), prob))
    return terms


def closed_classes(matrix) -> list[list[int]]:
    """Closed communicating classes of a stochastic matrix (support graph)."""
    support = np.array([[float(p) > 0 for p in row] for row in matrix])
    n_comp, labels = connected_components(support, directed=True, connection="strong")
    out = []
    for c in range(n_comp):
        members = np.flatnonzero(labels == c)
        leaves = support[np.ix_(members, np.setdiff1d(np.arange(len(matrix)), members))].any()
        if not leaves:
            out.append(members.tolist())
    return out


def stationary(chain: EmbeddedChain) -> StationaryLaw:
    """Exact solution of ``pi P = pi``, ``sum(pi) = 1`` on the recurrent class.

    States outside the unique closed class are reported as transient and get
    zero mass. Several closed classes make the answer ambiguous and raise.
    """
    backend = chain.backend
    P = chain.matrix
    n = P.shape[0]
    classes = closed_classes(P)
    if len(classes) != 1:
        pts = [[_plain_number(chain.grid.points[i]) for i in c] for c in classes]
        raise AmbiguousStationaryError(f"{len(classes)} closed classes: {pts}", classes=pts)
    cls = classes[0]
    m = len(cls)
    sub = P[np.ix_(cls, cls)]
    A = _zeros((m, m), backend)
    for i in range(m):
        for j in range(m):
            A[i, j] = sub[j, i] - (_one(backend) if i == j else _zero(backend))
    b = _zeros((m, 1), backend)
    A[m - 1, :] = [_one(backend)] * m
    b[m - 1, 0] = _one(backend)
    x = solve_linear(A.tolist(), b.tolist(), backend)
    pi = _zeros(n, backend)
    for k, i in enumerate(cls):
        pi[i] = x[k][0]
    if backend == "float":
        pi = np.clip(pi, 0.0, None)
        pi = pi / pi.sum()
    transient = tuple(i for i in range(n) if i not in set(cls))
    return StationaryLaw(chain.grid, pi, transient)


def limiting_mu(fmap: MonotoneMap, driver: RegenDriver, grid: StateGrid, pi,
                work_budget: int | None = None, tail_tol=None) -> DiscreteCdf:
    """Time-average limiting law of ``X_t``.

    ``mu = (1 / E tau) * sum_k P(tau > k, X_k in .)`` with ``X_0 ~ pi`` at the
    start of a cycle.
    """
    backend = grid.backend
    pi_vec = np.array(list(pi.pi if isinstance(pi, StationaryLaw) else
                           (pi.mass if isinstance(pi, DiscreteCdf) else pi)), dtype=object)
    if backend == "float":
        pi_vec = pi_vec.astype(float)
    S = step_matrices(fmap, driver, grid)
    n = len(grid)
    if driver.kind == "atom":
        _, B, Q, _, m = _atom_blocks(S, driver, backend)
        _check_budget((n * m) ** 3, work_budget, backend)
        occupation = pi_vec.copy()
        if m:
            rhs = (pi_vec @ B).reshape(-1, 1)
            IQt = (_eye(n * m, backend) - Q).T
            w = _solve_matrix(IQt, rhs, backend)[:, 0]
            for k in range(m):
                occupation = occupation + w[k * n:(k + 1) * n]
    else:
        cycles, covered = _cycle_list(driver, backend, tail_tol)
        _check_budget(sum(len(s) for _, s in cycles) * n * n, work_budget, backend)
        occupation = _zeros(n, backend)
        for p, states in cycles:
            v = pi_vec
            for z in states:
                occupation = occupation + v * p
                v = v @ S[z]
        if covered != 1:
            occupation = occupation / covered
    total = sum(occupation, _zero(backend))
    mu = occupation / total
    if backend == "float":
        mu = np.clip(mu.astype(float), 0.0, None)
        mu = mu / mu.sum()
    return DiscreteCdf(grid, list(mu))


def cycle_mean(driver: RegenDriver, backend=None, tail_tol=None):
    """Exact ``E tau`` (no truncation for Markov-atom drivers)."""
    backend = backend or driver.backend
    if driver.kind == "atom":
        from .drivers import expected_return_time
        return expected_return_time(driver.transition, driver.atom, backend)
    cycles, covered = _cycle_list(driver, backend, tail_tol)
    return sum((p * len(s) for p, s in cycles), _zero(backend)) / covered


def splitting_exact(fmap: MonotoneMap, driver: RegenDriver, grid: StateGrid, c,
                    chain: EmbeddedChain | None = None, **kw):
    """One-cycle splitting probabilities ``(P(top -> <= c), P(bottom -> >= c))``."""
    if not (grid.bottom <= c <= grid.top):
        raise ValidationError(f"c = {c} lies outside {grid.interval}")
    chain = chain or embedded_matrix(fmap, driver, grid, **kw)
    top, bottom = chain.matrix[-1], chain.matrix[0]
    zero = _zero(grid.backend)
    eps1 = sum((p for x, p in zip(grid.points, top) if x <= c), zero)
    eps2 = sum((p for x, p in zip(grid.points, bottom) if x >= c), zero)
    return eps1, eps2


def best_splitting_point(fmap: MonotoneMap, driver: RegenDriver, grid: StateGrid,
                         chain: EmbeddedChain | None = None, **kw):
    """Grid point maximizing ``min(eps1, eps2)``; returns ``(c, eps1, eps2)``."""
    chain = chain or embedded_matrix(fmap, driver, grid, **kw)
    best = None
    for c in grid.points:
        e1, e2 = splitting_exact(fmap, driver, grid, c, chain=chain)
        if best is None or min(e1, e2) > min(best[1], best[2]):
            best = (c, e1, e2)
    return best


def geometric_bound(eps, k: int):
    """``(1 - eps)^k``, exact for rational ``eps``."""
    if not (0 < eps <= 1):
        raise ValidationError(f"eps must lie in (0, 1], got {eps}")
    if k < 0:
        raise ValidationError("k must be nonnegative")
    return (1 - eps) ** k


def exact_contraction(chain: EmbeddedChain, k_max: int) -> list:
    """``d(law of Y_k | Y_0 = bottom, law of Y_k | Y_0 = top)`` for ``k = 1..k_max``."""
    backend = chain.backend
    n = len(chain.grid)
    lo = _zeros(n, backend)
    hi = _zeros(n, backend)
    lo[0] = _one(backend)
    hi[-1] = _one(backend)
    out = []
    for _ in range(k_max):
        lo = lo @ chain.matrix
        hi = hi @ chain.matrix
        out.append(uniform_distance(DiscreteCdf(chain.grid, list(lo)),
                                    DiscreteCdf(chain.grid, list(hi))))
    return out
