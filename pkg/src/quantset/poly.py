"""Sparse multivariate polynomials keyed by exponent vectors.

Every polynomial carries its ordered variable list; arithmetic between
polynomials requires identical lists (use :meth:`Polynomial.embed` to move a
polynomial into a larger variable list first).  Terms are stored in a plain
dict and are always iterated in graded-lex order.
"""
from __future__ import annotations

import json
import math
from typing import Iterable, Mapping, Sequence

import numpy as np

PRUNE_TOL = 1e-14

Monomial = tuple  # tuple[int, ...]


def grlex_key(exps: Sequence[int]):
    """Sort key: total degree first, then x1-heavy exponents first."""
    return (sum(exps), tuple(-e for e in exps))


class Polynomial:
    """Immutable sparse polynomial with real coefficients."""

    __slots__ = ("_vars", "_terms", "_hash")

    def __init__(self, variables: Iterable[str], terms: Mapping[Sequence[int], float] | None = None):
        variables = tuple(variables)
        if len(set(variables)) != len(variables):
            raise ValueError(f"duplicate variable names in {variables}")
        n = len(variables)
        clean: dict[tuple, float] = {}
        for exps, coef in (terms or {}).items():
            exps = tuple(int(e) for e in exps)
            if len(exps) != n:
                raise ValueError(f"exponent {exps} has length {len(exps)}, expected {n}")
            if any(e < 0 for e in exps):
                raise ValueError(f"negative exponent in {exps}")
            coef = float(coef)
            if not math.isfinite(coef):
                raise ValueError(f"non-finite coefficient {coef} at {exps}")
            clean[exps] = clean.get(exps, 0.0) + coef
        ordered = sorted((e for e, c in clean.items() if abs(c) > PRUNE_TOL), key=grlex_key)
        object.__setattr__(self, "_vars", variables)
        object.__setattr__(self, "_terms", {e: clean[e] for e in ordered})
        object.__setattr__(self, "_hash", None)

    def __setattr__(self, name, value):
        raise AttributeError("Polynomial is immutable")

    # -- constructors -----------------------------------------------------
    @classmethod
    def zero(cls, variables: Iterable[str]) -> "Polynomial":
        return cls(variables, {})

    @classmethod
    def constant(cls, variables: Iterable[str], value: float) -> "Polynomial":
        variables = tuple(variables)
        return cls(variables, {(0,) * len(variables): value})

    @classmethod
    def variable(cls, variables: Iterable[str], name: str) -> "Polynomial":
        variables = tuple(variables)
        exps = [0] * len(variables)
        exps[variables.index(name)] = 1
        return cls(variables, {tuple(exps): 1.0})

    @classmethod
    def monomial(cls, variables: Iterable[str], exps: Sequence[int], coef: float = 1.0) -> "Polynomial":
        return cls(variables, {tuple(exps): coef})

    # -- basic accessors --------------------------------------------------
    @property
    def variables(self) -> tuple:
        return self._vars

    @property
    def n_vars(self) -> int:
        return len(self._vars)

    @property
    def terms(self) -> dict:
        """Copy of the term map (graded-lex ordered)."""
        return dict(self._terms)

    def items(self):
        return self._terms.items()

    def coefficient(self, exps: Sequence[int]) -> float:
        return self._terms.get(tuple(exps), 0.0)

    @property
    def degree(self) -> int:
        """Total degree; the zero polynomial has degree -1."""
        if not self._terms:
            return -1
        return max(sum(e) for e in self._terms)

    def degree_in(self, names: Iterable[str]) -> int:
        idx = [self._vars.index(v) for v in names]
        if not self._terms:
            return -1
        return max(sum(e[i] for i in idx) for e in self._terms)

    def is_zero(self) -> bool:
        return not self._terms

    def depends_on(self, name: str) -> bool:
        i = self._vars.index(name)
        return any(e[i] for e in self._terms)

    def __len__(self):
        return len(self._terms)

    def __eq__(self, other):
        if not isinstance(other, Polynomial):
            return NotImplemented
        return self._vars == other._vars and self._terms == other._terms

    def __hash__(self):
        if self._hash is None:
            object.__setattr__(self, "_hash", hash((self._vars, tuple(self._terms.items()))))
        return self._hash

    def __repr__(self):
        return f"Polynomial({self})"

    def __str__(self):
        if not self._terms:
            return "0"
        parts = []
        for exps, c in self._terms.items():
            mono = "*".join(
                v if e == 1 else f"{v}^{e}" for v, e in zip(self._vars, exps) if e
            )
            if not mono:
                parts.append(f"{c:g}")
            elif c == 1.0:
                parts.append(mono)
            elif c == -1.0:
                parts.append(f"-{mono}")
            else:
                parts.append(f"{c:g}*{mono}")
        return " + ".join(parts).replace("+ -", "- ")

    # -- arithmetic -------------------------------------------------------
    def _check_compatible(self, other: "Polynomial"):
        if self._vars != other._vars:
            raise ValueError(f"variable lists differ: {self._vars} vs {other._vars}")

    def _coerce(self, other) -> "Polynomial":
        if isinstance(other, Polynomial):
            self._check_compatible(other)
            return other
        if isinstance(other, (int, float, np.floating, np.integer)):
            return Polynomial.constant(self._vars, float(other))
        return NotImplemented

    def __add__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        terms = dict(self._terms)
        for e, c in other._terms.items():
            terms[e] = terms.get(e, 0.0) + c
        return Polynomial(self._vars, terms)

    __radd__ = __add__

    def __neg__(self):
        return Polynomial(self._vars, {e: -c for e, c in self._terms.items()})

    def __sub__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, (int, float, np.floating, np.integer)):
            return Polynomial(self._vars, {e: c * float(other) for e, c in self._terms.items()})
        if not isinstance(other, Polynomial):
            return NotImplemented
        return multiply(self, other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, (int, float, np.floating, np.integer)):
            return self * (1.0 / float(other))
        return NotImplemented

    def __pow__(self, k: int):
        if not isinstance(k, int) or k < 0:
            raise ValueError("only nonnegative integer powers are supported")
        out = Polynomial.constant(self._vars, 1.0)
        base = self
        while k:
            if k & 1:
                out = out * base
            base = base * base
            k >>= 1
        return out

    # -- evaluation -------------------------------------------------------
    def __call__(self, point):
        return evaluate(self, point)

    def evaluate_many(self, points) -> np.ndarray:
        """Vectorized evaluation at the rows of an (N, n_vars) array."""
        pts = np.asarray(points, dtype=float)
        if pts.ndim == 1:
            pts = pts[None, :]
        if pts.shape[1] != self.n_vars:
            raise ValueError(f"points have {pts.shape[1]} columns, expected {self.n_vars}")
        out = np.zeros(pts.shape[0])
        if not self._terms:
            return out
        maxdeg = max(max(e) for e in self._terms) if self.n_vars else 0
        powers = [[np.ones(pts.shape[0])] for _ in range(self.n_vars)]
        for i in range(self.n_vars):
            for _ in range(maxdeg):
                powers[i].append(powers[i][-1] * pts[:, i])
        for exps, c in self._terms.items():
            term = np.full(pts.shape[0], c)
            for i, e in enumerate(exps):
                if e:
                    term = term * powers[i][e]
            out += term
        return out

    # -- variable-list manipulation --------------------------------------
    def embed(self, variables: Iterable[str]) -> "Polynomial":
        """Re-express in a variable list that contains all current variables."""
        variables = tuple(variables)
        missing = [v for v in self._vars if v not in variables]
        if missing:
            used = [v for v in missing if self.depends_on(v)]
            if used:
                raise ValueError(f"cannot drop variables {used} that the polynomial uses")
        pos = {v: i for i, v in enumerate(variables)}
        terms = {}
        for exps, c in self._terms.items():
            new = [0] * len(variables)
            for v, e in zip(self._vars, exps):
                if e:
                    new[pos[v]] = e
            terms[tuple(new)] = c
        return Polynomial(variables, terms)

    def rename(self, mapping: Mapping[str, str]) -> "Polynomial":
        return Polynomial([mapping.get(v, v) for v in self._vars], self._terms)

    def coefficient_vector(self, monomials: Sequence[Sequence[int]]) -> np.ndarray:
        return np.array([self._terms.get(tuple(m), 0.0) for m in monomials])

    def diff(self, name: str) -> "Polynomial":
        i = self._vars.index(name)
        terms = {}
        for exps, c in self._terms.items():
            if exps[i]:
                new = list(exps)
                new[i] -= 1
                terms[tuple(new)] = c * exps[i]
        return Polynomial(self._vars, terms)

    # -- serialization ----------------------------------------------------
    def to_dict(self) -> dict:
        return {
            "vars": list(self._vars),
            "terms": [{"exps": list(e), "coef": c} for e, c in self._terms.items()],
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> "Polynomial":
        variables = data["vars"]
        terms: dict = {}
        for t in data["terms"]:
            e = tuple(t["exps"])
            terms[e] = terms.get(e, 0.0) + float(t["coef"])
        return cls(variables, terms)

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> "Polynomial":
        return cls.from_dict(json.loads(text))


def evaluate(p: Polynomial, point) -> float:
    """Evaluate ``p`` at a single point, accumulating terms in graded-lex order."""
    point = [float(v) for v in np.ravel(np.asarray(point, dtype=float))]
    if len(point) != p.n_vars:
        raise ValueError(f"point has length {len(point)}, expected {p.n_vars}")
    total = 0.0
    for exps, c in p.items():
        term = c
        for v, e in zip(point, exps):
            if e:
                term *= v**e
        total += term
    return total


def multiply(p: Polynomial, q: Polynomial) -> Polynomial:
    p._check_compatible(q)
    terms: dict = {}
    for ep, cp in p.items():
        for eq, cq in q.items():
            e = tuple(a + b for a, b in zip(ep, eq))
            terms[e] = terms.get(e, 0.0) + cp * cq
    return Polynomial(p.variables, terms)


def substitute_affine(p: Polynomial, scale, shift) -> Polynomial:
    """Return p(scale * v + shift) expanded in the monomial basis."""
    scale = np.asarray(scale, dtype=float).ravel()
    shift = np.asarray(shift, dtype=float).ravel()
    n = p.n_vars
    if scale.shape != (n,) or shift.shape != (n,):
        raise ValueError(f"scale and shift must have length {n}")
    if np.any(scale == 0):
        raise ValueError("scale entries must be nonzero")
    variables = p.variables
    if np.all(scale == 1.0) and np.all(shift == 0.0):
        return p
    images = [
        Polynomial(variables, {tuple(int(j == i) for j in range(n)): scale[i], (0,) * n: shift[i]})
        for i in range(n)
    ]
    cache: dict = {}

    def power(i, e):
        if (i, e) not in cache:
            cache[(i, e)] = images[i] ** e
        return cache[(i, e)]

    out = Polynomial.zero(variables)
    for exps, c in p.items():
        term = Polynomial.constant(variables, c)
        for i, e in enumerate(exps):
            if e:
                term = term * power(i, e)
        out = out + term
    return out


def hessian_quadratic_form(p: Polynomial, direction_names: Sequence[str] | None = None) -> Polynomial:
    """The polynomial sum_ij d2p/dxi dxj * u_i u_j over the variables (x, u)."""
    xs = p.variables
    if direction_names is None:
        direction_names = tuple(f"u{i + 1}" for i in range(len(xs)))
    direction_names = tuple(direction_names)
    if len(direction_names) != len(xs):
        raise ValueError("need one direction variable per x-variable")
    if set(direction_names) & set(xs):
        raise ValueError("direction variable names collide with x-variables")
    ext = xs + direction_names
    out = Polynomial.zero(ext)
    for i, xi in enumerate(xs):
        di = p.diff(xi)
        for j, xj in enumerate(xs):
            dij = di.diff(xj)
            if dij.is_zero():
                continue
            uu = [0] * len(ext)
            uu[len(xs) + i] += 1
            uu[len(xs) + j] += 1
            out = out + dij.embed(ext) * Polynomial.monomial(ext, uu)
    return out


class PolyMatrix:
    """Symmetric matrix of polynomials sharing one variable list."""

    def __init__(self, entries: Sequence[Sequence[Polynomial]], tol: float = 0.0):
        rows = [list(r) for r in entries]
        size = len(rows)
        if size == 0 or any(len(r) != size for r in rows):
            raise ValueError("polynomial matrix must be square and nonempty")
        variables = rows[0][0].variables
        for r in rows:
            for e in r:
                if e.variables != variables:
                    raise ValueError("all entries must share the same variable list")
        for i in range(size):
            for j in range(i + 1, size):
                diff = rows[i][j] - rows[j][i]
                if any(abs(c) > tol for _, c in diff.items()):
                    raise ValueError(f"matrix is not symmetric at entry ({i}, {j})")
        self.entries = tuple(tuple(r) for r in rows)
        self.size = size
        self.variables = variables

    @property
    def dims(self):
        return (self.size, self.size)

    def __eq__(self, other):
        if not isinstance(other, PolyMatrix):
            return NotImplemented
        return self.entries == other.entries

    def __hash__(self):
        return hash(self.entries)

    def __getitem__(self, ij):
        i, j = ij
        return self.entries[i][j]

    def evaluate_many(self, points) -> np.ndarray:
        """Array of shape (N, size, size) with the matrix at every point."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        out = np.empty((pts.shape[0], self.size, self.size))
        for i in range(self.size):
            for j in range(i, self.size):
                vals = self.entries[i][j].evaluate_many(pts)
                out[:, i, j] = vals
                out[:, j, i] = vals
        return out

    def embed(self, variables) -> "PolyMatrix":
        return PolyMatrix([[e.embed(variables) for e in r] for r in self.entries])

    def to_list(self):
        return [[e.to_dict() for e in r] for r in self.entries]
