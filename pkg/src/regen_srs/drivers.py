"""Regenerative environments and their i.i.d. cycles.

A driver produces cycles ``(tau, z_0, ..., z_{tau-1})`` of environment states
together with a shock law ``G_z`` for every state. Sampling is vectorized over
many cycles; exact cycle laws are enumerated lazily when they are needed.

Every driver starts at a regeneration time: an atom driver starts in the atom,
a word driver starts right after a completed word.
"""
from __future__ import annotations

import math
from fractions import Fraction
from functools import cached_property, reduce
from typing import NamedTuple

import numpy as np
from scipy.sparse.csgraph import connected_components

from .errors import ValidationError
from .ordered import FLOAT_TOL, as_number
from .rng import make_rng

DEFAULT_MAX_LENGTH = 64
DEFAULT_MAX_CYCLES = 200_000


class Cycle(NamedTuple):
    length: int
    states: tuple


class ShockLaw(NamedTuple):
    values: tuple
    probs: tuple

    def mean(self):
        return sum(v * p for v, p in zip(self.values, self.probs))


class MeanEstimate(NamedTuple):
    mean: object
    stderr: float
    tail_mass: object
    exact: bool


def _zero(backend):
    return Fraction(0) if backend == "rational" else 0.0


def _one(backend):
    return Fraction(1) if backend == "rational" else 1.0


def _is_exact_input(x) -> bool:
    if isinstance(x, (Fraction, str)):
        return True
    if isinstance(x, (list, tuple)) and len(x) == 2 and all(isinstance(v, int) for v in x):
        return True
    return False


def infer_backend(*collections) -> str:
    """``"rational"`` if any probability was written exactly (Fraction, string or pair)."""
    def walk(obj):
        if _is_exact_input(obj):
            yield True
        elif isinstance(obj, dict):
            for v in obj.values():
                yield from walk(v)
        elif isinstance(obj, (list, tuple, np.ndarray)):
            for v in obj:
                yield from walk(v)
    return "rational" if any(any(walk(c)) for c in collections) else "float"


def _probabilities_ok(probs, backend) -> bool:
    total = sum(probs, _zero(backend))
    if backend == "rational":
        return total == 1
    return abs(total - 1.0) <= 1e-12 * max(1, len(probs))


def make_shock_law(pairs, backend="float") -> ShockLaw:
    """Build a finite shock law from ``(value, probability)`` pairs."""
    if isinstance(pairs, ShockLaw):
        pairs = list(zip(pairs.values, pairs.probs))
    if len(pairs) == 0:
        raise ValidationError("shock law has no support points")
    values = tuple(as_number(v, backend) for v, _ in pairs)
    probs = tuple(as_number(p, backend) for _, p in pairs)
    if any(p < 0 for p in probs):
        raise ValidationError("shock probabilities must be nonnegative")
    if not _probabilities_ok(probs, backend):
        raise ValidationError(f"shock probabilities sum to {sum(probs)}, not 1")
    return ShockLaw(values, probs)


def _check_stochastic(matrix, backend):
    n = len(matrix)
    if n == 0 or any(len(row) != n for row in matrix):
        raise ValidationError("transition matrix must be square and nonempty")
    for i, row in enumerate(matrix):
        if any(p < 0 for p in row):
            raise ValidationError(f"row {i} has a negative entry")
        if not _probabilities_ok(row, backend):
            raise ValidationError(f"row {i} sums to {sum(row)}, not 1")


def _reaches(matrix, target) -> set:
    """States from which ``target`` is reachable along positive-probability edges."""
    n = len(matrix)
    seen = {target}
    frontier = [target]
    while frontier:
        j = frontier.pop()
        for i in range(n):
            if i not in seen and matrix[i][j] > 0:
                seen.add(i)
                frontier.append(i)
    return seen


class RegenDriver:
    """Common machinery; use the constructor functions below."""

    kind = "abstract"

    def __init__(self, labels, shock_laws, backend, params):
        self.labels = tuple(labels)
        self.index = {lab: i for i, lab in enumerate(self.labels)}
        if len(self.index) != len(self.labels):
            raise ValidationError("state labels must be distinct")
        self.backend = backend
        self.params = params
        if shock_laws is None:
            shock_laws = {lab: [(i, 1)] for i, lab in enumerate(self.labels)}
        laws = []
        for lab in self.labels:
            if lab not in shock_laws:
                raise ValidationError(f"no shock law for state {lab!r}")
            laws.append(make_shock_law(shock_laws[lab], backend))
        self.shock_laws = tuple(laws)
        self._shock_vals = [np.asarray([float(v) for v in law.values]) for law in laws]
        cums = []
        for law in laws:
            c = np.cumsum([float(p) for p in law.probs])
            c[-1] = 1.0
            cums.append(c)
        self._shock_cums = cums

    def __repr__(self):
        return f"{type(self).__name__}(kind={self.kind!r}, states={self.labels}, backend={self.backend})"

    @property
    def n_states(self):
        return len(self.labels)

    def label_of(self, idx):
        return self.labels[idx]

    def sample_cycles(self, rng: np.random.Generator, m: int):
        """Draw ``m`` i.i.d. cycles.

        Returns ``(lengths, states)`` where ``states`` is the concatenation of
        the cycles' environment-state indices.
        """
        raise NotImplementedError

    def sample_shocks(self, rng: np.random.Generator, states: np.ndarray) -> np.ndarray:
        """One independent shock per entry of ``states`` drawn from ``G_z``."""
        u = rng.random(len(states))
        out = np.empty(len(states))
        for z in range(self.n_states):
            mask = states == z
            if not mask.any():
                continue
            k = np.searchsorted(self._shock_cums[z], u[mask], side="right")
            out[mask] = self._shock_vals[z][np.minimum(k, len(self._shock_vals[z]) - 1)]
        return out

    def _enumerate(self):
        """List of ``(prob, state-index tuple)``; may be truncated."""
        return None

    @cached_property
    def _enumeration(self):
        return self._enumerate()

    @property
    def has_enumeration(self) -> bool:
        return self._enumeration is not None

    @property
    def enumeration(self) -> list[tuple[object, Cycle]] | None:
        """Exact cycle law as ``(probability, Cycle)`` pairs, possibly truncated."""
        if self._enumeration is None:
            return None
        return [(p, Cycle(len(s), tuple(self.labels[i] for i in s))) for p, s in self._enumeration]

    @property
    def tail_mass(self):
        """Probability of cycles missing from :attr:`enumeration`."""
        if self._enumeration is None:
            return None
        total = sum((p for p, _ in self._enumeration), _zero(self.backend))
        tail = _one(self.backend) - total
        if self.backend == "float" and abs(tail) < FLOAT_TOL:
            return 0.0
        return tail

    def to_json(self) -> dict:
        return driver_to_json(self)


class ExplicitCycleDriver(RegenDriver):
    kind = "explicit"

    def __init__(self, cycles, shock_laws, labels, backend, params):
        super().__init__(labels, shock_laws, backend, params)
        probs, seqs = [], []
        for p, states in cycles:
            if isinstance(states, Cycle):
                states = states.states
            states = tuple(states)
            if len(states) == 0:
                raise ValidationError("cycles must have length >= 1")
            try:
                seqs.append(tuple(self.index[s] for s in states))
            except KeyError as exc:
                raise ValidationError(f"unknown state {exc.args[0]!r} in cycle") from None
            probs.append(as_number(p, backend))
        if any(p <= 0 for p in probs):
            raise ValidationError("cycle probabilities must be positive")
        if not _probabilities_ok(probs, backend):
            raise ValidationError(f"cycle probabilities sum to {sum(probs)}, not 1")
        self._cycles = list(zip(probs, seqs))
        lens = np.array([len(s) for s in seqs])
        self._lens = lens
        self._offsets = np.concatenate([[0], np.cumsum(lens)[:-1]])
        self._flat = np.concatenate([np.array(s, dtype=np.int64) for s in seqs])
        cum = np.cumsum([float(p) for p in probs])
        cum[-1] = 1.0
        self._cum = cum

    def sample_cycles(self, rng, m):
        pick = np.searchsorted(self._cum, rng.random(m), side="right")
        pick = np.minimum(pick, len(self._cum) - 1)
        lengths = self._lens[pick]
        ends = np.cumsum(lengths)
        local = np.arange(ends[-1]) - np.repeat(ends - lengths, lengths)
        states = self._flat[np.repeat(self._offsets[pick], lengths) + local]
        return lengths, states

    def _enumerate(self):
        return list(self._cycles)


class _ChainDriver(RegenDriver):
    """Drivers whose environment is a finite Markov chain."""

    def __init__(self, transition, labels, shock_laws, backend, params, max_length, max_cycles):
        matrix = [[as_number(p, backend) for p in row] for row in transition]
        _check_stochastic(matrix, backend)
        if labels is None:
            labels = list(range(len(matrix)))
        if len(labels) != len(matrix):
            raise ValidationError("label table length differs from matrix size")
        super().__init__(labels, shock_laws, backend, params)
        self.transition = tuple(tuple(row) for row in matrix)
        cum = np.cumsum(np.array([[float(p) for p in row] for row in matrix]), axis=1)
        cum[:, -1] = 1.0
        self._tcum = cum
        self.max_length = int(max_length)
        self.max_cycles = int(max_cycles)

    def _step(self, rng, cur):
        u = rng.random(len(cur))
        nxt = (self._tcum[cur] <= u[:, None]).sum(axis=1)
        return np.minimum(nxt, self.n_states - 1)

    def transition_float(self) -> np.ndarray:
        return np.array([[float(p) for p in row] for row in self.transition])

    def _run_until(self, rng, m, start, done):
        """Simulate ``m`` paths from ``start`` until ``done(cols, active, s)`` flags them.

        ``cols[t]`` holds the states at relative time ``t``; a path flagged at
        time ``s`` contributes the cycle made of its first ``s`` states.
        """
        cols = [np.full(m, start, dtype=np.int64)]
        lengths = np.zeros(m, dtype=np.int64)
        active = np.arange(m)
        s = 0
        while active.size:
            s += 1
            cols.append(np.full(m, -1, dtype=np.int64))
            cols[s][active] = self._step(rng, cols[s - 1][active])
            fin = done(cols, active, s)
            lengths[active[fin]] = s
            active = active[~fin]
        mat = np.stack(cols[:-1], axis=1)
        mask = np.arange(mat.shape[1])[None, :] < lengths[:, None]
        return lengths, mat[mask]

    def _enumerate_paths(self, start, done_fn):
        """Breadth-first enumeration of cycles up to ``max_length`` / ``max_cycles``."""
        one = _one(self.backend)
        out = []
        frontier = [(one, (start,))]
        s = 0
        while frontier and s < self.max_length:
            s += 1
            nxt = []
            for p, path in frontier:
                row = self.transition[path[-1]]
                for j, q in enumerate(row):
                    if q == 0:
                        continue
                    cand = path + (j,)
                    if done_fn(cand, s):
                        out.append((p * q, path))
                    else:
                        nxt.append((p * q, cand))
            if len(out) + len(nxt) > self.max_cycles:
                break
            frontier = nxt
        return out


class MarkovAtomDriver(_ChainDriver):
    kind = "atom"

    def __init__(self, transition, atom, labels=None, shock_laws=None, backend="float",
                 max_length=DEFAULT_MAX_LENGTH, max_cycles=DEFAULT_MAX_CYCLES, params=None):
        super().__init__(transition, labels, shock_laws, backend, params, max_length, max_cycles)
        if atom not in self.index:
            raise ValidationError(f"atom {atom!r} is not a state")
        self.atom = self.index[atom]
        missing = set(range(self.n_states)) - _reaches(self.transition, self.atom)
        if missing:
            raise ValidationError(
                f"atom {atom!r} is unreachable from states {[self.labels[i] for i in sorted(missing)]}"
            )

    def sample_cycles(self, rng, m):
        a = self.atom
        return self._run_until(rng, m, a, lambda cols, active, s: cols[s][active] == a)

    def _enumerate(self):
        a = self.atom
        return self._enumerate_paths(a, lambda cand, s: cand[-1] == a)

    def exact_mean_length(self):
        """``E tau = 1 / pi_atom`` from the absorbing-chain linear system."""
        return expected_return_time(self.transition, self.atom, self.backend)


class WordDriver(_ChainDriver):
    """Regeneration at successive non-overlapping word completions.

    A completion at time ``t`` counts only if ``t >= T_j + K`` where ``T_j``
    is the previous regeneration and ``K`` the longest word length, so a word
    never reuses states of the previous completion.
    """

    kind = "word"

    def __init__(self, transition, words, labels=None, shock_laws=None, backend="float",
                 max_length=DEFAULT_MAX_LENGTH, max_cycles=DEFAULT_MAX_CYCLES, params=None):
        super().__init__(transition, labels, shock_laws, backend, params, max_length, max_cycles)
        if not words:
            raise ValidationError("at least one word is required")
        try:
            ws = [tuple(self.index[s] for s in w) for w in words]
        except KeyError as exc:
            raise ValidationError(f"unknown state {exc.args[0]!r} in word") from None
        for w in ws:
            if len(w) == 0:
                raise ValidationError("words must be nonempty")
            for a, b in zip(w, w[1:]):
                if self.transition[a][b] == 0:
                    raise ValidationError(
                        f"word {[self.labels[i] for i in w]} has zero path probability")
        if len({w[-1] for w in ws}) > 1:
            raise ValidationError("all words must end with the same state")
        for i, u in enumerate(ws):
            for j, w in enumerate(ws):
                if i != j and _is_subword(u, w):
                    raise ValidationError(
                        f"word {[self.labels[k] for k in u]} is a sub-word of {[self.labels[k] for k in w]}")
        n_comp, _ = connected_components(
            np.array([[float(p) > 0 for p in row] for row in self.transition]),
            directed=True, connection="strong")
        if n_comp != 1:
            raise ValidationError("word regeneration needs an irreducible chain")
        self.words = tuple(ws)
        self.K = max(len(w) for w in ws)
        self.end_state = ws[0][-1]

    def _matches(self, cols, active, s):
        """Vectorized completion test at relative time ``s``."""
        hit = np.zeros(active.size, dtype=bool)
        if s < self.K:
            return hit
        for w in self.words:
            ok = np.ones(active.size, dtype=bool)
            for offset, state in enumerate(reversed(w)):
                ok &= cols[s - offset][active] == state
            hit |= ok
        return hit

    def sample_cycles(self, rng, m):
        return self._run_until(rng, m, self.end_state, self._matches)

    def _enumerate(self):
        def done(cand, s):
            if s < self.K:
                return False
            return any(cand[len(cand) - len(w):] == w for w in self.words)
        return self._enumerate_paths(self.end_state, done)


def _is_subword(u, w) -> bool:
    if len(u) > len(w):
        return False
    return any(w[i:i + len(u)] == u for i in range(len(w) - len(u) + 1))


def expected_return_time(transition, atom, backend="float"):
    """Mean first return time to ``atom`` via the absorbing-chain linear system."""
    from .exact import solve_linear

    n = len(transition)
    others = [i for i in range(n) if i != atom]
    one = _one(backend)
    if not others:
        return one
    # h_i = 1 + sum_{j != atom} P_ij h_j for i != atom
    A = [[(one if i == j else _zero(backend)) - as_number(transition[i][j], backend)
          for j in others] for i in others]
    b = [one] * len(others)
    h = solve_linear(A, [[x] for x in b], backend)
    return one + sum(as_number(transition[atom][j], backend) * h[k][0] for k, j in enumerate(others))


def markov_atom_driver(transition, atom, shock_laws=None, labels=None, backend=None,
                       max_length=DEFAULT_MAX_LENGTH, max_cycles=DEFAULT_MAX_CYCLES) -> MarkovAtomDriver:
    """Regenerations at successive visits of a finite Markov chain to ``atom``.

    ``shock_laws`` maps each state label to ``[(value, prob), ...]``; when
    omitted every state carries a point mass at its own index. Cycle
    enumeration is truncated at ``max_length`` (and ``max_cycles`` paths) and
    the missing probability is exposed as :attr:`RegenDriver.tail_mass`.
    """
    backend = backend or infer_backend(transition, shock_laws or {})
    params = {"kind": "atom", "transition": transition, "atom": atom, "labels": labels,
              "shocks": shock_laws, "max_length": max_length}
    return MarkovAtomDriver(transition, atom, labels=labels, shock_laws=shock_laws, backend=backend,
                            max_length=max_length, max_cycles=max_cycles, params=params)


def word_driver(transition, words, shock_laws=None, labels=None, backend=None,
                max_length=DEFAULT_MAX_LENGTH, max_cycles=DEFAULT_MAX_CYCLES) -> WordDriver:
    """Regenerations at non-overlapping completions of any of ``words``."""
    backend = backend or infer_backend(transition, shock_laws or {})
    params = {"kind": "word", "transition": transition, "words": [list(w) for w in words],
              "labels": labels, "shocks": shock_laws, "max_length": max_length}
    return WordDriver(transition, words, labels=labels, shock_laws=shock_laws, backend=backend,
                      max_length=max_length, max_cycles=max_cycles, params=params)


def explicit_cycle_driver(cycles, shock_laws, labels=None, backend=None) -> ExplicitCycleDriver:
    """Driver whose cycle law is the given list of ``(probability, states)``."""
    cycles = [(p, tuple(c.states) if isinstance(c, Cycle) else tuple(c)) for p, c in cycles]
    backend = backend or infer_backend([p for p, _ in cycles], shock_laws)
    if labels is None:
        seen = []
        for _, states in cycles:
            for s in states:
                if s not in seen:
                    seen.append(s)
        labels = sorted(seen, key=lambda s: (str(type(s)), s))
    params = {"kind": "explicit", "cycles": [[p, list(c)] for p, c in cycles],
              "labels": labels, "shocks": shock_laws}
    return ExplicitCycleDriver(cycles, shock_laws, labels, backend, params)


def iid_driver(shock_law, label=0, backend=None) -> ExplicitCycleDriver:
    """Every time is a regeneration: a single cycle of length one."""
    backend = backend or infer_backend(shock_law)
    return explicit_cycle_driver([(1, (label,))], {label: shock_law}, labels=[label], backend=backend)


def aperiodicity_check(driver: RegenDriver) -> bool:
    """True iff the gcd of the supported cycle lengths is 1."""
    if not driver.has_enumeration:
        raise ValidationError("aperiodicity needs an exact cycle enumeration")
    lengths = {len(s) for _, s in driver._enumeration}
    return reduce(math.gcd, lengths) == 1


def mean_cycle_length(driver: RegenDriver, samples: int | None = None, seed: int = 0,
                      stream: int = 0) -> MeanEstimate:
    """Expected cycle length.

    Exact when the driver enumerates its cycle law (a truncated enumeration
    gives the truncated sum and reports the tail mass). Otherwise a Monte
    Carlo mean over ``samples`` cycles with its standard error.
    """
    if driver.has_enumeration and samples is None:
        zero = _zero(driver.backend)
        mean = sum((p * len(s) for p, s in driver._enumeration), zero)
        return MeanEstimate(mean, 0.0, driver.tail_mass, driver.tail_mass == 0)
    if samples is None:
        raise ValidationError("no enumeration available; pass a sample budget")
    lengths, _ = driver.sample_cycles(make_rng(seed, stream), int(samples))
    se = float(lengths.std(ddof=1) / math.sqrt(len(lengths))) if len(lengths) > 1 else float("inf")
    return MeanEstimate(float(lengths.mean()), se, None, False)


# -- JSON ---------------------------------------------------------------------

def _encode_number(x):
    if isinstance(x, Fraction):
        return [x.numerator, x.denominator]
    return x


def _encode(obj):
    if isinstance(obj, dict):
        return {str(k): _encode(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_encode(v) for v in obj]
    return _encode_number(obj)


def driver_to_json(driver: RegenDriver) -> dict:
    """Serializable document; rationals become ``[numerator, denominator]`` pairs."""
    doc = {"kind": driver.kind, "backend": driver.backend, "labels": list(driver.labels)}
    doc["shocks"] = {str(lab): [[_encode_number(v), _encode_number(p)]
                                for v, p in zip(law.values, law.probs)]
                     for lab, law in zip(driver.labels, driver.shock_laws)}
    if driver.kind == "explicit":
        doc["cycles"] = [[_encode_number(p), [driver.labels[i] for i in s]] for p, s in driver._cycles]
    else:
        doc["transition"] = [[_encode_number(p) for p in row] for row in driver.transition]
        doc["max_length"] = driver.max_length
        if driver.kind == "atom":
            doc["atom"] = driver.labels[driver.atom]
        else:
            doc["words"] = [[driver.labels[i] for i in w] for w in driver.words]
    return doc


def _decode_shocks(raw, labels):
    if raw is None:
        return None
    out = {}
    lookup = {str(lab): lab for lab in labels}
    for key, pairs in raw.items():
        lab = lookup.get(str(key), key)
        out[lab] = [(v, p) for v, p in pairs]
    return out


def driver_from_json(doc: dict) -> RegenDriver:
    """Inverse of :func:`driver_to_json`; also accepts hand-written specs.

    Numbers may be JSON numbers, ``"p/q"`` strings or ``[p, q]`` pairs.
    """
    kind = doc.get("kind")
    backend = doc.get("backend")
    if kind == "explicit":
        cycles = [(p, tuple(states)) for p, states in doc["cycles"]]
        labels = doc.get("labels")
        if labels is None:
            labels = []
            for _, states in cycles:
                labels.extend(s for s in states if s not in labels)
        return explicit_cycle_driver(cycles, _decode_shocks(doc.get("shocks"), labels),
                                     labels=labels, backend=backend)
    if kind in ("atom", "word"):
        transition = doc["transition"]
        labels = doc.get("labels") or list(range(len(transition)))
        shocks = _decode_shocks(doc.get("shocks"), labels)
        kw = dict(shock_laws=shocks, labels=labels, backend=backend,
                  max_length=doc.get("max_length", DEFAULT_MAX_LENGTH))
        if kind == "atom":
            return markov_atom_driver(transition, doc["atom"], **kw)
        return word_driver(transition, doc["words"], **kw)
    raise ValidationError(f"unknown driver kind {kind!r}")


def encode_json(obj):
    """Recursively replace Fractions by ``[num, den]`` pairs."""
    return _encode(obj)
