"""Lebesgue moments on [-1, 1]^n and rescaling of problems to that frame."""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .basis import MomentVector, enumerate_monomials
from .poly import Polynomial, substitute_affine
from .problem import BoxDomain, Constraint, ProblemSpec


def box_moment(exps) -> float:
    """Normalized moment of x^a under the uniform probability measure on [-1, 1]^n."""
    if any(e % 2 for e in exps):
        return 0.0
    out = Fraction(1)
    for e in exps:
        out /= e + 1
    return float(out)


def box_moments(n_vars: int, max_degree: int) -> MomentVector:
    basis = enumerate_monomials(n_vars, max_degree)
    return MomentVector(basis, np.array([box_moment(m) for m in basis]))


@dataclass(frozen=True)
class ScaledProblem:
    """A problem expressed in the frame x in [-1, 1]^n, ||y||^2 <= 1.

    ``generators`` holds the rescaled user constraints followed by
    1 - ||y||^2 (omitted when there is no y); ``thetas`` are 1 - x_i^2.
    Original coordinates are recovered as x = x_scale * x' + x_shift and
    y = y_scale * y'.
    """

    original: ProblemSpec
    x_scale: np.ndarray
    x_shift: np.ndarray
    y_scale: float
    generators: tuple
    thetas: tuple
    f: Polynomial
    warnings: tuple = field(default=(), compare=False)

    @property
    def x_vars(self):
        return self.original.x_vars

    @property
    def variables(self):
        return self.original.variables

    @property
    def n(self):
        return self.original.n

    @property
    def m(self):
        return self.original.m

    def to_original(self, p: Polynomial) -> Polynomial:
        """Map an x-polynomial from the scaled frame back to original coordinates."""
        return substitute_affine(p, 1.0 / self.x_scale, -self.x_shift / self.x_scale)

    def to_scaled(self, p: Polynomial) -> Polynomial:
        """Map an x-polynomial in original coordinates into the scaled frame."""
        return substitute_affine(p, self.x_scale, self.x_shift)

    def joint_to_scaled(self, p: Polynomial) -> Polynomial:
        scale = np.concatenate([self.x_scale, np.full(self.m, self.y_scale)])
        shift = np.concatenate([self.x_shift, np.zeros(self.m)])
        return substitute_affine(p, scale, shift)


def _check_y_bound(spec: ProblemSpec, samples: int = 10_000, seed: int = 0) -> list:
    """Sample points of K (inequalities only) and report any with ||y||^2 > M."""
    if spec.m == 0:
        return []
    msgs = []
    if any(c.kind == "eq" for c in spec.all_constraints()):
        return msgs
    rng = np.random.default_rng(seed)
    r = 2.0 * np.sqrt(spec.y_bound)
    found = 0
    violations = 0
    for _ in range(20):
        x = spec.box.sample(rng, samples)
        y = rng.uniform(-r, r, size=(samples, spec.m))
        pts = np.hstack([x, y])
        ok = np.zeros(samples, dtype=bool)
        for piece in spec.pieces():
            mask = np.ones(samples, dtype=bool)
            for c in piece:
                mask &= c.poly.evaluate_many(pts) >= 0
            ok |= mask
        found += int(ok.sum())
        violations += int((np.sum(y[ok] ** 2, axis=1) > spec.y_bound * (1 + 1e-9)).sum())
        if found >= samples:
            break
    if violations:
        msgs.append(
            f"y_bound {spec.y_bound} looks too small: {violations} of {found} sampled feasible points "
            "have ||y||^2 > y_bound"
        )
    return msgs


def rescale_problem(spec: ProblemSpec, check_samples: int = 10_000) -> ScaledProblem:
    """Rescale a scalar-objective problem to x in [-1, 1]^n and ||y||^2 <= 1."""
    if spec.objective.kind != "scalar":
        raise ValueError("rescale_problem needs a scalar objective; transform the problem first")
    if not spec.y_bound > 0:
        raise ValueError("y_bound must be positive")
    n, m = spec.n, spec.m
    variables = spec.variables
    h = spec.box.half_width
    c = spec.box.center
    ys = float(np.sqrt(spec.y_bound))
    scale = np.concatenate([h, np.full(m, ys)])
    shift = np.concatenate([c, np.zeros(m)])

    def sub(p):
        return substitute_affine(p, scale, shift)

    gens = [Constraint(sub(g.poly), g.kind) for g in spec.constraints]
    if m:
        ball = {(0,) * (n + m): 1.0}
        for i in range(m):
            e = [0] * (n + m)
            e[n + i] = 2
            ball[tuple(e)] = -1.0
        gens.append(Constraint(Polynomial(variables, ball), "ineq"))
    thetas = []
    for i in range(n):
        e = [0] * (n + m)
        e[i] = 2
        thetas.append(Polynomial(variables, {(0,) * (n + m): 1.0, tuple(e): -1.0}))
    msgs = _check_y_bound(spec, check_samples) if check_samples else []
    for msg in msgs:
        warnings.warn(msg, stacklevel=2)
    return ScaledProblem(
        original=spec,
        x_scale=h,
        x_shift=c,
        y_scale=ys,
        generators=tuple(gens),
        thetas=tuple(thetas),
        f=sub(spec.f),
        warnings=tuple(msgs),
    )
