"""JSON problem files ("quantset-problem/1"): schema, loading and writing.

Polynomials are written as ``{"terms": [{"exps": [...], "coef": c}, ...]}``
over the joint variable list x1..xn, y1..ym; an optional ``"vars"`` entry
must repeat exactly that list.
"""
from __future__ import annotations

import json
from pathlib import Path

import jsonschema

from .poly import Polynomial, PolyMatrix
from .problem import BoxDomain, Constraint, Objective, ProblemSpec

SCHEMA_VERSION = "quantset-problem/1"

_POLY = {
    "type": "object",
    "additionalProperties": False,
    "required": ["terms"],
    "properties": {
        "vars": {"type": "array", "items": {"type": "string"}},
        "terms": {
            "type": "array",
            "items": {
                "type": "object",
                "additionalProperties": False,
                "required": ["exps", "coef"],
                "properties": {
                    "exps": {"type": "array", "items": {"type": "integer", "minimum": 0}},
                    "coef": {"type": "number"},
                },
            },
        },
    },
}

_CONSTRAINT = {
    "type": "object",
    "additionalProperties": False,
    "required": ["poly", "kind"],
    "properties": {"poly": {"$ref": "#/$defs/poly"}, "kind": {"enum": ["ineq", "eq"]}},
}

PROBLEM_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "additionalProperties": False,
    "required": ["schema", "n", "m", "box", "y_bound", "constraints", "objective", "mode"],
    "$defs": {"poly": _POLY, "constraint": _CONSTRAINT},
    "properties": {
        "schema": {"const": SCHEMA_VERSION},
        "n": {"type": "integer", "minimum": 1},
        "m": {"type": "integer", "minimum": 0},
        "box": {
            "type": "object",
            "additionalProperties": False,
            "required": ["lower", "upper"],
            "properties": {
                "lower": {"type": "array", "items": {"type": "number"}},
                "upper": {"type": "array", "items": {"type": "number"}},
            },
        },
        "y_bound": {"type": "number", "exclusiveMinimum": 0},
        "constraints": {"type": "array", "items": {"$ref": "#/$defs/constraint"}},
        "objective": {
            "type": "object",
            "minProperties": 1,
            "maxProperties": 1,
            "additionalProperties": False,
            "properties": {
                "scalar": {"$ref": "#/$defs/poly"},
                "pmi": {
                    "type": "array",
                    "minItems": 1,
                    "items": {"type": "array", "minItems": 1, "items": {"$ref": "#/$defs/poly"}},
                },
                "min_of": {"type": "array", "minItems": 2, "maxItems": 2, "items": {"$ref": "#/$defs/poly"}},
                "max_of": {"type": "array", "minItems": 1, "items": {"$ref": "#/$defs/poly"}},
            },
        },
        "mode": {"enum": ["inner", "outer"]},
        "union_pieces": {
            "type": "array",
            "items": {"type": "array", "items": {"$ref": "#/$defs/constraint"}},
        },
        "description": {"type": "string"},
    },
}


class ProblemFileError(ValueError):
    """Schema or consistency failure; ``errors`` holds one message per problem."""

    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))


def _path(err) -> str:
    out = "$"
    for part in err.absolute_path:
        out += f"[{part}]" if isinstance(part, int) else f".{part}"
    return out


def _poly(data, variables, where, errors):
    if "vars" in data and tuple(data["vars"]) != variables:
        errors.append(f"{where}.vars: expected {list(variables)}, got {data['vars']}")
        return None
    terms = {}
    for i, t in enumerate(data["terms"]):
        if len(t["exps"]) != len(variables):
            errors.append(f"{where}.terms[{i}].exps: expected {len(variables)} exponents, got {len(t['exps'])}")
            return None
        e = tuple(t["exps"])
        terms[e] = terms.get(e, 0.0) + float(t["coef"])
    return Polynomial(variables, terms)


def parse_problem(doc: dict) -> ProblemSpec:
    validator = jsonschema.Draft202012Validator(PROBLEM_SCHEMA)
    errs = sorted(validator.iter_errors(doc), key=lambda e: (list(map(str, e.absolute_path)), e.message))
    if errs:
        raise ProblemFileError(f"{_path(e)}: {e.message}" for e in errs)
    n, m = doc["n"], doc["m"]
    xs = tuple(f"x{i + 1}" for i in range(n))
    ys = tuple(f"y{i + 1}" for i in range(m))
    variables = xs + ys
    errors = []
    lo, hi = doc["box"]["lower"], doc["box"]["upper"]
    if len(lo) != n or len(hi) != n:
        errors.append(f"$.box: lower and upper need {n} entries")
    elif any(not a < b for a, b in zip(lo, hi)):
        errors.append("$.box: lower < upper required componentwise")

    def constraints(items, where):
        out = []
        for i, c in enumerate(items):
            p = _poly(c["poly"], variables, f"{where}[{i}].poly", errors)
            if p is not None:
                out.append(Constraint(p, c["kind"]))
        return tuple(out)

    cons = constraints(doc["constraints"], "$.constraints")
    pieces = tuple(constraints(pc, f"$.union_pieces[{t}]") for t, pc in enumerate(doc.get("union_pieces", [])))
    (kind, body), = doc["objective"].items()
    objective = None
    if kind == "scalar":
        p = _poly(body, variables, "$.objective.scalar", errors)
        objective = Objective.of(p) if p is not None else None
    elif kind == "pmi":
        size = len(body)
        if any(len(row) != size for row in body):
            errors.append("$.objective.pmi: matrix must be square")
        else:
            rows = [[_poly(e, variables, f"$.objective.pmi[{i}][{j}]", errors) for j, e in enumerate(row)]
                    for i, row in enumerate(body)]
            if not errors:
                try:
                    objective = Objective("pmi", matrix=PolyMatrix(rows))
                except ValueError as exc:
                    errors.append(f"$.objective.pmi: {exc}")
    else:
        ps = [_poly(e, variables, f"$.objective.{kind}[{i}]", errors) for i, e in enumerate(body)]
        if not errors:
            objective = Objective(kind, pieces=tuple(ps))
    if errors:
        raise ProblemFileError(errors)
    return ProblemSpec(xs, ys, BoxDomain(lo, hi), float(doc["y_bound"]), cons, objective, doc["mode"],
                       pieces)


def load_problem(path) -> ProblemSpec:
    text = Path(path).read_text()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ProblemFileError([f"line {exc.lineno}, column {exc.colno}: {exc.msg}"]) from None
    return parse_problem(doc)


def _poly_doc(p: Polynomial) -> dict:
    return {"terms": [{"exps": list(e), "coef": c} for e, c in p.items()]}


def problem_to_dict(spec: ProblemSpec, description: str | None = None) -> dict:
    """Inverse of parse_problem (variable names are not stored; x1.., y1.. assumed)."""
    obj = spec.objective
    if obj.kind == "scalar":
        body = _poly_doc(obj.scalar)
    elif obj.kind == "pmi":
        body = [[_poly_doc(e) for e in row] for row in obj.matrix.entries]
    else:
        body = [_poly_doc(q) for q in obj.pieces]
    doc = {
        "schema": SCHEMA_VERSION,
        "n": spec.n,
        "m": spec.m,
        "box": {"lower": list(spec.box.lower), "upper": list(spec.box.upper)},
        "y_bound": spec.y_bound,
        "constraints": [{"poly": _poly_doc(c.poly), "kind": c.kind} for c in spec.constraints],
        "objective": {obj.kind: body},
        "mode": spec.mode,
    }
    if spec.union_pieces:
        doc["union_pieces"] = [[{"poly": _poly_doc(c.poly), "kind": c.kind} for c in p] for p in spec.union_pieces]
    if description:
        doc["description"] = description
    return doc


def write_problem(spec: ProblemSpec, path, description: str | None = None):
    Path(path).write_text(json.dumps(problem_to_dict(spec, description), indent=2) + "\n")


def load_polynomial(path) -> Polynomial:
    return Polynomial.from_dict(json.loads(Path(path).read_text()))


def write_polynomial(p: Polynomial, path):
    Path(path).write_text(json.dumps(p.to_dict(), indent=2) + "\n")
