"""Dynamic-programming models compiled into monotone recursions."""
from ..errors import ValidationError
from .common import PolicySolution, SrsModel, compile_policy
from .growth import (GrowthInterval, GrowthSpec, closed_form_policy, growth_euler, growth_interval,
                     solve_growth)
from .huggett import (HuggettBounds, HuggettSpec, budget_gap, eventual_descent_point, huggett_bounds,
                      huggett_euler, lemma_descent_scan, solve_huggett)
from .risk_sharing import (RiskSharingSpec, RiskSharingSystem, arrangement_values, autarky_values,
                           clamp_map, compile_risk_sharing, risk_sharing_map, solve_intervals)

SPEC_TYPES = {"huggett": HuggettSpec, "growth": GrowthSpec, "risksharing": RiskSharingSpec}


def compile_to_srs(obj, atom: int = 0) -> SrsModel:
    """``(fmap, driver, grid)`` for a solved policy or a risk-sharing spec.

    Policies are projected onto their grid by rounding down, which keeps the
    map monotone at the cost of at most one cell of downward bias. Every
    exogenous state carries a degenerate shock (its own index) and the driver
    regenerates at visits to state ``atom``.
    """
    if isinstance(obj, PolicySolution):
        return compile_policy(obj, atom)
    if isinstance(obj, RiskSharingSpec):
        return compile_risk_sharing(obj)
    raise ValidationError(f"cannot compile {type(obj).__name__}")


def model_from_json(doc: dict):
    kind = doc.get("kind")
    if kind not in SPEC_TYPES:
        raise ValidationError(f"unknown model kind {kind!r}")
    return SPEC_TYPES[kind].from_json(doc)


def solve(spec, tol: float = 1e-8, max_iter: int = 5000):
    """Solve a Huggett or growth spec; risk-sharing specs get their intervals filled in."""
    if isinstance(spec, HuggettSpec):
        return solve_huggett(spec, tol=tol, max_iter=max_iter)
    if isinstance(spec, GrowthSpec):
        return solve_growth(spec, tol=tol, max_iter=max_iter)
    if isinstance(spec, RiskSharingSpec):
        if spec.intervals is not None:
            return spec
        return spec.with_intervals(solve_intervals(spec, tol=min(tol, 1e-10), max_iter=max_iter))
    raise ValidationError(f"cannot solve {type(spec).__name__}")


def model_checks(doc: dict) -> list:
    """Named pass/fail checks of a model document's invariants, without solving it."""
    import numpy as np

    kind = doc.get("kind")
    out = []

    def add(name, fn):
        try:
            out.append((name, bool(fn())))
        except (KeyError, TypeError, ValueError):
            out.append((name, False))

    def positive_stochastic(key="transition"):
        P = np.asarray(doc[key], dtype=float)
        return P.ndim == 2 and P.shape[0] == P.shape[1] and np.all(P > 0) and np.allclose(P.sum(1), 1, atol=1e-12)

    if kind == "huggett":
        e = np.asarray(doc["endowments"], dtype=float)
        add("gamma > 1", lambda: doc["gamma"] > 1)
        add("0 < beta < 1/R", lambda: 0 < doc["beta"] < 1 / doc["R"])
        add("endowments positive, nondecreasing, e_n > e_1",
            lambda: len(e) >= 2 and e[0] > 0 and np.all(np.diff(e) >= 0) and e[-1] > e[0])
        add("transition stochastic with all entries > 0", positive_stochastic)
        add("a_lower < 0", lambda: doc["a_lower"] < 0)
        add("a_lower + e_1 - a_lower/R > 0", lambda: doc["a_lower"] + e[0] - doc["a_lower"] / doc["R"] > 0)
    elif kind == "growth":
        add("0 < beta < 1", lambda: 0 < doc["beta"] < 1)
        add("0 < alpha < 1", lambda: 0 < doc["alpha"] < 1)
        add("transition stochastic with all entries > 0", positive_stochastic)
        try:
            spec = GrowthSpec.from_json({**doc, "strict": False})
        except ValidationError:
            spec = None
        add("output exceeds k_lower at the grid bottom for some state",
            lambda: spec is not None and np.any(spec.phi(spec.k_lower, np.asarray(spec.shocks)) > spec.k_lower))
        add("two states with equal rows and ordered output",
            lambda: spec is not None and spec.ordered_pair() is not None)
    elif kind == "risksharing":
        y = np.asarray(doc["endowments"], dtype=float)
        add("0 < beta < 1", lambda: 0 < doc["beta"] < 1)
        add("endowments inside (0, Y)", lambda: len(y) >= 2 and np.all(y > 0) and np.all(y < doc["Y"]))
        add("transition stochastic with all entries > 0", positive_stochastic)
        if "intervals" in doc:
            iv = np.asarray(doc["intervals"], dtype=float)
            add("0 < lo <= hi < Y for every interval",
                lambda: np.all(iv[:, 0] <= iv[:, 1]) and np.all(iv > 0) and np.all(iv < doc["Y"]))
    return out
