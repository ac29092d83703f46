"""Problem data: box, constraints, objective kinds and quantifier mode."""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .poly import Polynomial, PolyMatrix

INNER = "inner"
OUTER = "outer"


@dataclass(frozen=True)
class BoxDomain:
    lower: tuple
    upper: tuple

    def __post_init__(self):
        lo = tuple(float(v) for v in self.lower)
        hi = tuple(float(v) for v in self.upper)
        if len(lo) != len(hi):
            raise ValueError("box bounds have different lengths")
        if any(not a < b for a, b in zip(lo, hi)):
            raise ValueError(f"box requires lower < upper componentwise, got {lo} / {hi}")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @classmethod
    def unit(cls, n: int) -> "BoxDomain":
        return cls((-1.0,) * n, (1.0,) * n)

    @property
    def dim(self) -> int:
        return len(self.lower)

    @property
    def center(self) -> np.ndarray:
        return (np.array(self.upper) + np.array(self.lower)) / 2

    @property
    def half_width(self) -> np.ndarray:
        return (np.array(self.upper) - np.array(self.lower)) / 2

    @property
    def volume(self) -> float:
        return float(np.prod(np.array(self.upper) - np.array(self.lower)))

    def sample(self, rng: np.random.Generator, count: int) -> np.ndarray:
        return rng.uniform(self.lower, self.upper, size=(count, self.dim))

    def grid(self, resolution: int) -> np.ndarray:
        """Tensor grid of resolution**n points, first coordinate varying slowest."""
        axes = [np.linspace(a, b, resolution) for a, b in zip(self.lower, self.upper)]
        mesh = np.meshgrid(*axes, indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=1)

    def cell_centers(self, resolution: int) -> np.ndarray:
        axes = []
        for a, b in zip(self.lower, self.upper):
            h = (b - a) / resolution
            axes.append(a + h * (np.arange(resolution) + 0.5))
        mesh = np.meshgrid(*axes, indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=1)


@dataclass(frozen=True)
class Constraint:
    poly: Polynomial
    kind: str = "ineq"  # "ineq": poly >= 0, "eq": poly == 0

    def __post_init__(self):
        if self.kind not in ("ineq", "eq"):
            raise ValueError(f"constraint kind must be 'ineq' or 'eq', not {self.kind!r}")


@dataclass(frozen=True)
class Objective:
    """What is quantified.

    kind is one of ``scalar`` (a polynomial f), ``pmi`` (a symmetric
    polynomial matrix A, the target being ``A >= 0`` for every admissible y),
    ``min_of`` / ``max_of`` (pointwise min / max of polynomials).
    """

    kind: str
    scalar: Polynomial | None = None
    matrix: PolyMatrix | None = None
    pieces: tuple = ()

    def __post_init__(self):
        if self.kind == "scalar" and self.scalar is None:
            raise ValueError("scalar objective needs a polynomial")
        if self.kind == "pmi" and self.matrix is None:
            raise ValueError("pmi objective needs a matrix")
        if self.kind in ("min_of", "max_of") and len(self.pieces) < 1:
            raise ValueError(f"{self.kind} objective needs at least one polynomial")
        if self.kind not in ("scalar", "pmi", "min_of", "max_of"):
            raise ValueError(f"unknown objective kind {self.kind!r}")

    @classmethod
    def of(cls, f: Polynomial) -> "Objective":
        return cls("scalar", scalar=f)

    def polynomials(self):
        if self.kind == "scalar":
            return [self.scalar]
        if self.kind == "pmi":
            return [e for r in self.matrix.entries for e in r]
        return list(self.pieces)


@dataclass(frozen=True)
class ProblemSpec:
    """x in a box, y with ||y||^2 <= y_bound on K, constraints g_j(x, y) (>= 0 or == 0).

    ``union_pieces`` (optional) turns K into the union over t of
    {shared constraints} intersected with {piece t constraints}.
    """

    x_vars: tuple
    y_vars: tuple
    box: BoxDomain
    y_bound: float
    constraints: tuple
    objective: Objective
    mode: str = INNER
    union_pieces: tuple = ()
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "x_vars", tuple(self.x_vars))
        object.__setattr__(self, "y_vars", tuple(self.y_vars))
        object.__setattr__(self, "constraints", tuple(self.constraints))
        object.__setattr__(self, "union_pieces", tuple(tuple(p) for p in self.union_pieces))
        if self.mode not in (INNER, OUTER):
            raise ValueError(f"mode must be 'inner' or 'outer', not {self.mode!r}")
        if self.box.dim != len(self.x_vars):
            raise ValueError(f"box has dimension {self.box.dim} but there are {len(self.x_vars)} x-variables")
        if not self.y_bound > 0:
            raise ValueError(f"y_bound must be positive, got {self.y_bound}")
        joint = self.variables
        if len(set(joint)) != len(joint):
            raise ValueError("x and y variable names overlap")
        for c in self.all_constraints():
            if c.poly.variables != joint:
                raise ValueError(f"constraint uses variables {c.poly.variables}, expected {joint}")
        for p in self.objective.polynomials():
            if p.variables != joint:
                raise ValueError(f"objective uses variables {p.variables}, expected {joint}")

    @property
    def n(self) -> int:
        return len(self.x_vars)

    @property
    def m(self) -> int:
        return len(self.y_vars)

    @property
    def variables(self) -> tuple:
        return self.x_vars + self.y_vars

    def all_constraints(self):
        yield from self.constraints
        for piece in self.union_pieces:
            yield from piece

    def pieces(self) -> list:
        """Constraint lists of each basic piece of K (a single one without a union)."""
        if not self.union_pieces:
            return [self.constraints]
        return [self.constraints + tuple(p) for p in self.union_pieces]

    def with_(self, **changes) -> "ProblemSpec":
        return replace(self, **changes)

    @property
    def f(self) -> Polynomial:
        if self.objective.kind != "scalar":
            raise ValueError(f"objective is {self.objective.kind}, not scalar")
        return self.objective.scalar


def make_spec(
    n: int,
    m: int,
    objective,
    constraints: Sequence = (),
    box: BoxDomain | None = None,
    y_bound: float = 1.0,
    mode: str = INNER,
    union_pieces: Sequence = (),
    x_names=None,
    y_names=None,
) -> ProblemSpec:
    """Convenience constructor; ``objective`` may be a Polynomial or an Objective,
    constraints may be Polynomials (read as >= 0) or Constraints."""
    x_names = tuple(x_names or (f"x{i + 1}" for i in range(n)))
    y_names = tuple(y_names or (f"y{i + 1}" for i in range(m)))

    def cons(items):
        return tuple(c if isinstance(c, Constraint) else Constraint(c, "ineq") for c in items)

    if isinstance(objective, Polynomial):
        objective = Objective.of(objective)
    return ProblemSpec(
        x_vars=x_names,
        y_vars=y_names,
        box=box or BoxDomain.unit(n),
        y_bound=y_bound,
        constraints=cons(constraints),
        objective=objective,
        mode=mode,
        union_pieces=tuple(cons(p) for p in union_pieces),
    )
