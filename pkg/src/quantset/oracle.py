"""Brute-force checks that never touch the SDP machinery.

The value function is maximized over a tensor grid in y, volumes are Monte
Carlo estimates, and all sampling is split into fixed-size chunks seeded
with (seed, chunk_id), so results do not depend on how the work is scheduled.
Objectives are evaluated with their own semantics: a PMI objective uses the
largest eigenvalue of -A, min_of / max_of use the pointwise min / max.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .measures import box_moments
from .poly import Polynomial
from .problem import BoxDomain, ProblemSpec

CHUNK = 10_000
INEQ_TOL = 1e-9
EQ_TOL = 1e-6


class ThinSetError(RuntimeError):
    """Raised when rejection sampling almost never lands in K."""


class DominanceError(RuntimeError):
    def __init__(self, report: "SampleReport"):
        super().__init__(f"polynomial fails dominance at {report.violation_count} sampled points")
        self.report = report


@dataclass
class SampleReport:
    kind: str
    samples: int
    seed: int
    estimate: float
    std_error: float
    violations: list = field(default_factory=list)
    violation_count: int = 0
    accepted: int = 0
    extra: dict = field(default_factory=dict)

    MAX_LISTED = 100

    def add_violations(self, points, margins):
        self.violation_count += len(margins)
        room = self.MAX_LISTED - len(self.violations)
        for pt, mg in list(zip(points, margins))[: max(room, 0)]:
            self.violations.append(([float(v) for v in pt], float(mg)))

    def to_dict(self) -> dict:
        out = {
            "kind": self.kind,
            "samples": self.samples,
            "seed": self.seed,
            "estimate": self.estimate,
            "std_error": self.std_error,
            "accepted": self.accepted,
            "violation_count": self.violation_count,
            "violations": [{"point": p, "margin": m} for p, m in self.violations],
        }
        if self.extra:
            out["extra"] = self.extra
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def _chunks(samples: int, seed: int):
    done = 0
    cid = 0
    while done < samples:
        size = min(CHUNK, samples - done)
        yield np.random.default_rng([seed, cid]), size
        done += size
        cid += 1


def feasible_mask(spec: ProblemSpec, pts: np.ndarray) -> np.ndarray:
    """Points (rows over x then y) satisfying every constraint of some piece of K."""
    ok = np.zeros(len(pts), dtype=bool)
    for piece in spec.pieces():
        mask = np.ones(len(pts), dtype=bool)
        for c in piece:
            v = c.poly.evaluate_many(pts)
            mask &= (np.abs(v) <= EQ_TOL) if c.kind == "eq" else (v >= -INEQ_TOL)
        ok |= mask
    return ok


def objective_values(spec: ProblemSpec, pts: np.ndarray) -> np.ndarray:
    """Value of the (possibly non-polynomial) objective at joint points."""
    obj = spec.objective
    if obj.kind == "scalar":
        return obj.scalar.evaluate_many(pts)
    if obj.kind == "pmi":
        mats = obj.matrix.evaluate_many(pts)
        return np.linalg.eigvalsh(-mats)[:, -1]
    vals = np.stack([q.evaluate_many(pts) for q in obj.pieces])
    return vals.min(axis=0) if obj.kind == "min_of" else vals.max(axis=0)


def _y_grid(spec: ProblemSpec, resolution: int) -> np.ndarray:
    if spec.m == 0:
        return np.zeros((1, 0))
    r = math.sqrt(spec.y_bound)
    return BoxDomain((-r,) * spec.m, (r,) * spec.m).grid(resolution)


def value_function_many(spec: ProblemSpec, xs, grid_resolution: int = 101) -> np.ndarray:
    """max_y f(x, y) over the feasible points of a y-grid, for every row of xs.

    Rows with no feasible grid point get -inf.
    """
    if grid_resolution < 2:
        raise ValueError("grid_resolution must be at least 2")
    xs = np.atleast_2d(np.asarray(xs, dtype=float))
    ygrid = _y_grid(spec, grid_resolution)
    ny = len(ygrid)
    out = np.full(len(xs), -np.inf)
    per = max(1, 200_000 // ny)
    for start in range(0, len(xs), per):
        xb = xs[start : start + per]
        pts = np.hstack([np.repeat(xb, ny, axis=0), np.tile(ygrid, (len(xb), 1))])
        vals = objective_values(spec, pts)
        vals = np.where(feasible_mask(spec, pts), vals, -np.inf)
        out[start : start + len(xb)] = vals.reshape(len(xb), ny).max(axis=1)
    return out


def value_function(spec: ProblemSpec, x, grid_resolution: int = 101) -> float:
    return float(value_function_many(spec, np.atleast_2d(x), grid_resolution)[0])


def _sample_joint(spec: ProblemSpec, rng, size):
    x = spec.box.sample(rng, size)
    if spec.m == 0:
        return x
    r = math.sqrt(spec.y_bound)
    return np.hstack([x, rng.uniform(-r, r, size=(size, spec.m))])


def check_dominance(p: Polynomial, spec: ProblemSpec, samples: int = 100_000, seed: int = 0,
                    tol: float = 1e-6) -> SampleReport:
    """Rejection-sample (x, y) in K and flag points where p(x) < f(x, y) - tol."""
    if p.variables != spec.x_vars:
        raise ValueError(f"polynomial must be over the x-variables {spec.x_vars}")
    rep = SampleReport("dominance", samples, seed, 0.0, 0.0)
    for rng, size in _chunks(samples, seed):
        pts = _sample_joint(spec, rng, size)
        pts = pts[feasible_mask(spec, pts)]
        if not len(pts):
            continue
        rep.accepted += len(pts)
        margin = p.evaluate_many(pts[:, : spec.n]) - objective_values(spec, pts)
        bad = margin < -tol
        rep.add_violations(pts[bad], margin[bad])
    if rep.accepted < 1e-4 * samples:
        raise ThinSetError(f"K too thin for rejection sampling: {rep.accepted} of {samples} draws accepted")
    frac = rep.violation_count / rep.accepted
    rep.estimate = frac
    rep.std_error = math.sqrt(frac * (1 - frac) / rep.accepted)
    return rep


def mc_volume(predicate, box: BoxDomain, samples: int = 100_000, seed: int = 0) -> SampleReport:
    """Fraction of the box where ``predicate`` (vectorized over rows) holds."""
    if samples < 1000:
        raise ValueError("use at least 1000 samples")
    hits = 0
    for rng, size in _chunks(samples, seed):
        hits += int(np.count_nonzero(predicate(box.sample(rng, size))))
    frac = hits / samples
    return SampleReport("volume", samples, seed, frac, math.sqrt(frac * (1 - frac) / samples), accepted=hits)


def check_inner_soundness(p: Polynomial, spec: ProblemSpec, samples: int = 100_000, seed: int = 0,
                          grid_resolution: int = 101, tol: float = 1e-6) -> SampleReport:
    """Points with p(x) <= 0 must have f(x, y) <= tol for every grid y in K_x."""
    rep = SampleReport("inner_soundness", samples, seed, 0.0, 0.0)
    for rng, size in _chunks(samples, seed):
        xs = spec.box.sample(rng, size)
        xs = xs[p.evaluate_many(xs) <= 0]
        if not len(xs):
            continue
        rep.accepted += len(xs)
        jbar = value_function_many(spec, xs, grid_resolution)
        bad = jbar > tol
        rep.add_violations(xs[bad], jbar[bad])
    rep.estimate = rep.accepted / samples
    rep.std_error = math.sqrt(rep.estimate * (1 - rep.estimate) / samples)
    return rep


def sample_inner_violations(p: Polynomial, spec: ProblemSpec, samples: int = 100_000, seed: int = 0,
                            tol: float = 1e-6) -> SampleReport:
    """Rejection-sample (x, y) in K and flag points with p(x) <= 0 but f(x, y) > tol."""
    rep = SampleReport("inner_soundness_joint", samples, seed, 0.0, 0.0)
    for rng, size in _chunks(samples, seed):
        pts = _sample_joint(spec, rng, size)
        pts = pts[feasible_mask(spec, pts)]
        rep.accepted += len(pts)
        fv = objective_values(spec, pts)
        bad = (p.evaluate_many(pts[:, : spec.n]) <= 0) & (fv > tol)
        rep.add_violations(pts[bad], fv[bad])
    if rep.accepted < 1e-4 * samples:
        raise ThinSetError(f"K too thin for rejection sampling: {rep.accepted} of {samples} draws accepted")
    rep.estimate = rep.violation_count / rep.accepted
    return rep


def check_outer_soundness(p: Polynomial, spec: ProblemSpec, samples: int = 100_000, seed: int = 0,
                          grid_resolution: int = 101, threshold: float = 1e-3,
                          tol: float = 1e-6) -> SampleReport:
    """Points whose grid value function is >= threshold must have p(x) >= -tol."""
    rep = SampleReport("outer_soundness", samples, seed, 0.0, 0.0)
    for rng, size in _chunks(samples, seed):
        xs = spec.box.sample(rng, size)
        pv = p.evaluate_many(xs)
        cand = pv < -tol
        if not cand.any():
            continue
        jbar = value_function_many(spec, xs[cand], grid_resolution)
        bad = jbar >= threshold
        rep.add_violations(xs[cand][bad], pv[cand][bad])
    rep.estimate = rep.violation_count / samples
    return rep


def gap_volume(p: Polynomial, spec: ProblemSpec, samples: int = 100_000, seed: int = 0,
               grid_resolution: int = 101) -> SampleReport:
    """Box fraction of the region between the approximation and the target.

    Inner mode: {J <= 0} minus {p <= 0} (what the inner set misses).
    Outer mode: {p >= 0} minus {J >= 0} (what the outer set adds).
    The value function J is the grid oracle.
    """
    hits = 0
    for rng, size in _chunks(samples, seed):
        xs = spec.box.sample(rng, size)
        pv = p.evaluate_many(xs)
        cand = pv > 0 if spec.mode == "inner" else pv >= 0
        if not cand.any():
            continue
        jbar = value_function_many(spec, xs[cand], grid_resolution)
        hits += int(np.count_nonzero(jbar <= 0 if spec.mode == "inner" else jbar < 0))
    frac = hits / samples
    return SampleReport(f"gap_volume_{spec.mode}", samples, seed, frac, math.sqrt(frac * (1 - frac) / samples),
                        accepted=hits)


def l1_gap(p: Polynomial, spec: ProblemSpec, grid_resolution: int = 41, y_resolution: int = 101,
           dominance_samples: int = 10_000, seed: int = 0) -> float:
    """Midpoint-rule estimate of the box average of p - J(x); dominance is checked first."""
    rep = check_dominance(p, spec, dominance_samples, seed)
    if rep.violation_count:
        raise DominanceError(rep)
    xs = spec.box.cell_centers(grid_resolution)
    jbar = value_function_many(spec, xs, y_resolution)
    return float(np.mean(p.evaluate_many(xs) - jbar))


def quadrature_moment_check(n: int, max_degree: int) -> float:
    """Max |closed-form box moment - Gauss-Legendre tensor quadrature| over degree <= max_degree."""
    nodes, weights = np.polynomial.legendre.leggauss(max_degree // 2 + 1)
    weights = weights / 2.0
    z = box_moments(n, max_degree)
    worst = 0.0
    for mono, val in zip(z.basis, z.values):
        q = 1.0
        for e in mono:
            q *= float(np.dot(weights, nodes**e))
        worst = max(worst, abs(q - val))
    return worst
