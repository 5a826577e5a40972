"""JSON job specs and on-disk reports.

A spec is one JSON object whose ``kind`` selects the schema:

``srs``
    ``map``, ``driver`` and optionally ``grid``, ``interval``, ``x0``, ``backend``.
``example4``
    The four-state toy recursion; no other fields.
``chain``
    A finite Markov chain: ``transition`` and optional ``labels``.
``huggett`` / ``growth`` / ``risksharing``
    Model primitives (see :mod:`regen_srs.models`).

Numbers in ``srs`` and ``chain`` specs may be JSON numbers, ``"p/q"`` strings
or ``[p, q]`` pairs. Structural errors are reported with the JSON path of the
offending field.
"""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from pathlib import Path

import jsonschema
import numpy as np

from . import fixtures
from .drivers import RegenDriver, driver_from_json, infer_backend
from .errors import SchemaError, ValidationError
from .ordered import MonotoneMap, StateGrid, as_number, clamp_add_map, identity_map

NUMBER = {"oneOf": [{"type": "number"}, {"type": "string", "pattern": r"^\s*-?\d+(\s*/\s*\d+)?\s*$"},
                    {"type": "array", "items": {"type": "integer"}, "minItems": 2, "maxItems": 2}]}
NUMBERS = {"type": "array", "items": NUMBER, "minItems": 1}
MATRIX = {"type": "array", "items": NUMBERS, "minItems": 1}
FLOATS = {"type": "array", "items": {"type": "number"}, "minItems": 1}
FMATRIX = {"type": "array", "items": FLOATS, "minItems": 1}
SHOCKS = {"type": "object", "additionalProperties": {
    "type": "array", "minItems": 1, "items": {"type": "array", "prefixItems": [NUMBER, NUMBER],
                                              "minItems": 2, "maxItems": 2}}}

DRIVER_SCHEMA = {
    "type": "object",
    "required": ["kind"],
    "properties": {"kind": {"enum": ["explicit", "atom", "word"]}, "backend": {"enum": ["float", "rational"]},
                   "labels": {"type": "array"}, "shocks": SHOCKS, "transition": MATRIX,
                   "cycles": {"type": "array", "minItems": 1,
                              "items": {"type": "array", "prefixItems": [NUMBER, {"type": "array", "minItems": 1}],
                                        "minItems": 2, "maxItems": 2}},
                   "atom": {}, "words": {"type": "array", "items": {"type": "array", "minItems": 1}},
                   "max_length": {"type": "integer", "minimum": 1}},
    "allOf": [
        {"if": {"properties": {"kind": {"const": "explicit"}}}, "then": {"required": ["cycles"]}},
        {"if": {"properties": {"kind": {"const": "atom"}}}, "then": {"required": ["transition", "atom"]}},
        {"if": {"properties": {"kind": {"const": "word"}}}, "then": {"required": ["transition", "words"]}},
    ],
}

MAP_SCHEMA = {
    "type": "object",
    "required": ["kind"],
    "properties": {"kind": {"enum": ["clamp_add", "identity", "clamp", "table"]},
                   "lo": {}, "hi": {}, "grid": NUMBERS, "shocks": NUMBERS, "next": MATRIX},
    "allOf": [
        {"if": {"properties": {"kind": {"enum": ["clamp_add", "identity"]}}},
         "then": {"required": ["lo", "hi"], "properties": {"lo": NUMBER, "hi": NUMBER}}},
        {"if": {"properties": {"kind": {"const": "clamp"}}},
         "then": {"required": ["lo", "hi"], "properties": {"lo": NUMBERS, "hi": NUMBERS}}},
        {"if": {"properties": {"kind": {"const": "table"}}}, "then": {"required": ["grid", "shocks", "next"]}},
    ],
}

PROB_MATRIX = {"type": "array", "minItems": 1, "items": {"type": "array", "minItems": 1,
                                                         "items": {"type": "number", "minimum": 0}}}

SCHEMAS = {
    "srs": {"type": "object", "required": ["kind", "map", "driver"],
            "properties": {"kind": {"const": "srs"}, "map": MAP_SCHEMA, "driver": DRIVER_SCHEMA,
                           "grid": NUMBERS, "interval": {"type": "array", "items": NUMBER, "minItems": 2,
                                                         "maxItems": 2},
                           "x0": NUMBER, "backend": {"enum": ["float", "rational"]}},
            "additionalProperties": False},
    "example4": {"type": "object", "properties": {"kind": {"const": "example4"},
                                                  "backend": {"enum": ["float", "rational"]}},
                 "additionalProperties": False},
    "chain": {"type": "object", "required": ["kind", "transition"],
              "properties": {"kind": {"const": "chain"}, "transition": MATRIX, "labels": {"type": "array"},
                             "backend": {"enum": ["float", "rational"]}},
              "additionalProperties": False},
    "huggett": {"type": "object", "required": ["kind", "gamma", "beta", "R", "endowments", "transition", "a_lower"],
                "properties": {"kind": {"const": "huggett"}, "gamma": {"type": "number"}, "beta": {"type": "number"},
                               "R": {"type": "number"}, "endowments": FLOATS, "transition": PROB_MATRIX,
                               "a_lower": {"type": "number"}, "a_max": {"type": "number"},
                               "n_grid": {"type": "integer", "minimum": 3}},
                "additionalProperties": False},
    "growth": {"type": "object", "required": ["kind", "beta", "alpha", "shocks", "transition"],
               "properties": {"kind": {"const": "growth"}, "beta": {"type": "number"}, "alpha": {"type": "number"},
                              "shocks": FLOATS, "transition": PROB_MATRIX, "sigma": {"type": "number"},
                              "delta": {"type": "number"}, "k_lower": {"type": ["number", "null"]},
                              "n_grid": {"type": "integer", "minimum": 3}, "strict": {"type": "boolean"}},
               "additionalProperties": False},
    "risksharing": {"type": "object", "required": ["kind", "beta", "Y", "endowments", "transition"],
                    "properties": {"kind": {"const": "risksharing"}, "beta": {"type": "number"},
                                   "Y": {"type": "number"}, "endowments": FLOATS, "transition": PROB_MATRIX,
                                   "gamma": {"type": "number"},
                                   "intervals": {"type": "array", "items": {"type": "array", "items": {"type": "number"},
                                                                            "minItems": 2, "maxItems": 2}}},
                    "additionalProperties": False},
}
MODEL_KINDS = ("huggett", "growth", "risksharing")


def _json_path(error) -> str:
    path = "$"
    for part in error.absolute_path:
        path += f"[{part}]" if isinstance(part, int) else f".{part}"
    return path


def check_schema(doc) -> None:
    """Raise :class:`SchemaError` naming the first offending field."""
    if not isinstance(doc, dict):
        raise SchemaError("spec must be a JSON object")
    kind = doc.get("kind")
    if kind not in SCHEMAS:
        raise SchemaError(f"unknown kind {kind!r}; expected one of {sorted(SCHEMAS)}", "$.kind")
    validator = jsonschema.Draft202012Validator(SCHEMAS[kind])
    errors = sorted(validator.iter_errors(doc), key=lambda e: (len(list(e.absolute_path)), str(e.absolute_path)))
    if errors:
        err = max(errors, key=lambda e: len(list(e.absolute_path)))
        raise SchemaError(err.message, _json_path(err))


def load_json(path) -> dict:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ValidationError(f"cannot read {path}: {exc.strerror}") from exc
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"invalid JSON ({exc.msg}) at line {exc.lineno}") from exc


def _at(path):
    """Re-raise validation errors from a builder with a JSON path prefix."""

    class _Ctx:
        def __enter__(self):
            return self

        def __exit__(self, typ, exc, tb):
            if exc is not None and isinstance(exc, ValidationError) and not isinstance(exc, SchemaError):
                raise SchemaError(str(exc), path) from exc
            return False

    return _Ctx()


def table_map(grid, shocks, table, backend="float") -> MonotoneMap:
    """Map given by ``next[i][j] = f(grid[i], shocks[j])``; states round down to the grid."""
    g = StateGrid(grid, backend)
    sh = [as_number(v, backend) for v in shocks]
    nxt = [[as_number(y, backend) for y in row] for row in table]
    if len(nxt) != len(g) or any(len(r) != len(sh) for r in nxt):
        raise ValidationError("next must have one row per grid point and one column per shock")
    lookup_v = {v: j for j, v in enumerate(sh)}
    pts = list(g.points)

    def one(x, v):
        j = lookup_v.get(as_number(v, backend) if backend == "rational" else float(v))
        if j is None:
            raise ValidationError(f"shock {v} is not in the table")
        i = g.lookup(x)
        if i is None:
            i = max(0, int(np.searchsorted(np.asarray(pts, dtype=float), float(x), side="right")) - 1)
        return nxt[i][j]

    def func(x, v):
        if np.ndim(x) == 0 and np.ndim(v) == 0:
            return one(x, v)
        x, v = np.broadcast_arrays(np.asarray(x), np.asarray(v))
        out = [one(a, b) for a, b in zip(x.ravel().tolist(), v.ravel().tolist())]
        return np.asarray(out, dtype=object if backend == "rational" else float).reshape(x.shape)

    return MonotoneMap(func, scalar=lambda x, v: float(one(x, v)), shock_values=tuple(sh), name="table",
                       interval=(pts[0], pts[-1]))


def map_from_json(doc: dict, backend="float") -> MonotoneMap:
    kind = doc["kind"]
    if kind == "clamp_add":
        return clamp_add_map(as_number(doc["lo"], backend), as_number(doc["hi"], backend))
    if kind == "identity":
        m = identity_map()
        return MonotoneMap(m.func, scalar=lambda x, v: x, name="identity",
                           interval=(as_number(doc["lo"], backend), as_number(doc["hi"], backend)))
    if kind == "clamp":
        from .models.risk_sharing import clamp_map
        lo = [float(as_number(x)) for x in doc["lo"]]
        hi = [float(as_number(x)) for x in doc["hi"]]
        if len(lo) != len(hi) or any(a > b for a, b in zip(lo, hi)):
            raise ValidationError("clamp needs matching lo/hi lists with lo <= hi")
        return clamp_map(lo, hi)
    return table_map(doc["grid"], doc["shocks"], doc["next"], backend)


def _numeric_backend(doc: dict) -> str:
    """Rational if any probability, shock value or grid point is written exactly."""
    d = doc["driver"]
    probs = [d.get("transition", []), [c[0] for c in d.get("cycles", [])],
             [pair for pairs in d.get("shocks", {}).values() for pair in pairs]]
    return infer_backend(*probs, doc.get("grid", []))


@dataclass
class Job:
    """A loaded spec: either a recursion ready to run or a model spec to solve."""

    kind: str
    doc: dict
    fmap: MonotoneMap | None = None
    driver: RegenDriver | None = None
    grid: StateGrid | None = None
    interval: tuple | None = None
    x0: object = None
    backend: str = "float"
    model: object = None
    solution: object = None

    @property
    def has_grid(self) -> bool:
        return self.grid is not None


def build_job(doc: dict, backend: str | None = None, tol: float = 1e-8, max_iter: int = 5000,
              solve_models: bool = True) -> Job:
    """Validate ``doc`` and turn it into a :class:`Job`.

    ``backend`` overrides the spec's own choice. Model specs are solved and
    compiled when ``solve_models`` is set.
    """
    check_schema(doc)
    kind = doc["kind"]
    if kind == "example4":
        b = backend or doc.get("backend", "rational")
        return Job(kind, doc, fixtures.example4_map(), fixtures.example4_driver(b), fixtures.example4_grid(b),
                   (as_number(0, b), as_number(3, b)), as_number(0, b), b)
    if kind == "chain":
        b = backend or doc.get("backend") or infer_backend(doc["transition"])
        return Job(kind, doc, backend=b)
    if kind == "srs":
        b = backend or doc.get("backend") or doc["driver"].get("backend") or _numeric_backend(doc)
        with _at("$.driver"):
            ddoc = dict(doc["driver"])
            ddoc["backend"] = b
            driver = driver_from_json(ddoc)
        with _at("$.map"):
            fmap = map_from_json(doc["map"], b)
        grid = None
        if "grid" in doc:
            with _at("$.grid"):
                grid = StateGrid(doc["grid"], b)
        if "interval" in doc:
            with _at("$.interval"):
                interval = tuple(as_number(x, b) for x in doc["interval"])
                if interval[0] > interval[1]:
                    raise ValidationError("interval must be [lo, hi] with lo <= hi")
        elif grid is not None:
            interval = grid.interval
        elif fmap.interval is not None:
            interval = tuple(fmap.interval)
        else:
            raise SchemaError("need grid or interval for this map", "$")
        x0 = as_number(doc["x0"], b) if "x0" in doc else interval[0]
        return Job(kind, doc, fmap, driver, grid, interval, x0, b)
    from . import models
    with _at("$"):
        spec = models.model_from_json(doc)
    job = Job(kind, doc, backend="float", model=spec)
    if not solve_models:
        return job
    solved = models.solve(spec, tol=tol, max_iter=max_iter)
    if kind == "risksharing":
        rs = models.risk_sharing_map(solved)
        job.solution = solved
        job.fmap, job.driver, job.grid = rs.fmap, rs.driver, rs.grid
        job.interval = (rs.grid.bottom, rs.grid.top)
        job.x0 = rs.c_min
        return job
    compiled = models.compile_to_srs(solved)
    job.solution = solved
    job.fmap, job.driver, job.grid = compiled
    job.interval = compiled.grid.interval
    job.x0 = compiled.grid.bottom
    return job


# -- reports ---------------------------------------------------------------------------

def write_text(path: Path, text: str) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def file_digest(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def write_metadata(out: Path, meta: dict) -> Path:
    """``metadata.json`` with sorted keys; contains no timestamps so reruns are byte-identical."""
    path = out / "metadata.json"
    write_text(path, json.dumps(meta, indent=1, sort_keys=True, default=str) + "\n")
    return path


def rows_to_csv(header, rows) -> str:
    lines = [",".join(header)]
    for r in rows:
        lines.append(",".join(_cell(x) for x in r))
    return "\n".join(lines) + "\n"


def _cell(x) -> str:
    from fractions import Fraction
    if x is None:
        return ""
    if isinstance(x, Fraction):
        return str(x)
    if isinstance(x, (bool, np.bool_)):
        return str(int(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)
