"""Hierarchy drivers and problem transforms.

Every driver follows the same pipeline per order k: turn the objective into
a scalar polynomial (lifting if needed), rescale to the unit frame, assemble
the SOS program (plus optional add-ons), solve, and map the optimal p back to
original coordinates.  p always approximates the value function from above;
the set predicate (``le0`` for inner, ``ge0`` for outer) is derived from the
mode.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import certify, conic, oracle
from .measures import rescale_problem
from .poly import Polynomial, PolyMatrix
from .problem import INNER, OUTER, BoxDomain, Constraint, Objective, ProblemSpec, make_spec

__all__ = [
    "ProblemSpec", "LiftedProblem", "ApproximationResult", "IntersectionResult", "TwoQuantifierSpec",
    "CompositionResult", "approximate", "approximate_inner", "approximate_outer", "pmi_to_scalar",
    "lift_min", "to_scalar", "split_max_of", "approximate_intersection", "compose_exists_forall",
    "compose_forall_exists", "sample_value_function_warnings",
]

PREDICATES = {INNER: "le0", OUTER: "ge0"}


def predicate_mask(p: Polynomial, predicate: str, points) -> np.ndarray:
    v = p.evaluate_many(points)
    if predicate == "le0":
        return v <= 0
    if predicate == "ge0":
        return v >= 0
    raise ValueError(f"unknown predicate {predicate!r}")


@dataclass(frozen=True)
class ApproximationResult:
    """Outcome of one order of the hierarchy.

    ``p`` is in original coordinates (None when the solve failed);
    ``p_scaled`` lives on the unit frame and is what add-ons consume.
    """

    k: int
    order: int
    status: str
    predicate: str
    p: Polynomial | None = None
    p_scaled: Polynomial | None = None
    rho: float = math.nan
    solve_seconds: float = 0.0
    diagnostics: dict = field(default_factory=dict)
    metadata: dict = field(default_factory=dict)
    warnings: tuple = ()
    solution: conic.SdpSolution | None = field(default=None, repr=False, compare=False)
    template: certify.CertificateTemplate | None = field(default=None, repr=False, compare=False)

    @property
    def optimal(self) -> bool:
        return self.status == conic.OPTIMAL

    def contains(self, points) -> np.ndarray:
        """Membership of rows of ``points`` in the approximating set."""
        if self.p is None:
            raise ValueError(f"order {self.k} has no polynomial (status {self.status})")
        return predicate_mask(self.p, self.predicate, points)

    def summary(self) -> dict:
        return {"k": self.k, "order": self.order, "rho_k": self.rho, "status": self.status,
                "predicate": self.predicate, "diagnostics": self.diagnostics}


# ---------------------------------------------------------------- transforms

def _fresh_names(prefix: str, count: int, taken) -> tuple:
    names = tuple(f"{prefix}{i + 1}" for i in range(count))
    while set(names) & set(taken):
        names = tuple("_" + s for s in names)
    return names


def pmi_to_scalar(source, box: BoxDomain | None = None, sense: str = "psd", mode: str = INNER) -> ProblemSpec:
    """Replace a matrix inequality by a scalar objective over the unit sphere.

    ``source`` is a ProblemSpec with a ``pmi`` objective or a bare PolyMatrix
    (then its variables are all x-variables).  For ``sense="psd"`` the
    objective becomes f = -<z, A z> with ||z||^2 = 1, so the inner set of
    f is {A >= 0}; ``sense="nsd"`` flips the sign.
    """
    if isinstance(source, PolyMatrix):
        xs = source.variables
        base = ProblemSpec(xs, (), box or BoxDomain.unit(len(xs)), 1.0, (),
                           Objective("pmi", matrix=source), mode)
    else:
        base = source
        if base.objective.kind != "pmi":
            raise ValueError("pmi_to_scalar needs a pmi objective")
    if sense not in ("psd", "nsd"):
        raise ValueError("sense must be 'psd' or 'nsd'")
    A = base.objective.matrix
    s = A.size
    zs = _fresh_names("y" if base.m == 0 else "z", s, base.variables)
    joint = base.variables + zs
    zpolys = [Polynomial.variable(joint, z) for z in zs]
    quad = Polynomial.zero(joint)
    for i in range(s):
        for j in range(s):
            quad = quad + A[i, j].embed(joint) * zpolys[i] * zpolys[j]
    f = -quad if sense == "psd" else quad
    sphere = Constraint(sum((z * z for z in zpolys), Polynomial.zero(joint)) - 1.0, "eq")

    def emb(cs):
        return tuple(Constraint(c.poly.embed(joint), c.kind) for c in cs)

    return ProblemSpec(
        x_vars=base.x_vars,
        y_vars=base.y_vars + zs,
        box=base.box,
        y_bound=(base.y_bound + 1.0) if base.m else 1.0,
        constraints=emb(base.constraints) + (sphere,),
        objective=Objective.of(f),
        mode=base.mode,
        union_pieces=tuple(emb(p) for p in base.union_pieces),
        meta={"transform": "pmi", "sense": sense, "sphere_vars": zs},
    )


def _abs_bound(q: Polynomial, radius: float) -> float:
    """Crude sup-norm bound of q on the cube of half-width ``radius``."""
    return float(sum(abs(c) * radius ** sum(e) for e, c in q.items()))


@dataclass(frozen=True)
class LiftedProblem:
    """min(q1, q2) represented through two extra variables (v, w):
    w^2 = (q1 - q2)^2, w >= 0, 2 v = q1 + q2 - w, with bounds keeping
    (y, v, w) inside a known ball.  The lifted objective is v."""

    base: ProblemSpec
    q1: Polynomial
    q2: Polynomial
    extra_vars: tuple
    extra_constraints: tuple
    objective: Polynomial
    y_bound: float

    @property
    def variables(self) -> tuple:
        return self.base.variables + self.extra_vars

    def to_spec(self) -> ProblemSpec:
        joint = self.variables

        def emb(cs):
            return tuple(Constraint(c.poly.embed(joint), c.kind) for c in cs)

        return ProblemSpec(
            x_vars=self.base.x_vars,
            y_vars=self.base.y_vars + self.extra_vars,
            box=self.base.box,
            y_bound=self.y_bound,
            constraints=emb(self.base.constraints) + self.extra_constraints,
            objective=Objective.of(self.objective),
            mode=self.base.mode,
            union_pieces=tuple(emb(p) for p in self.base.union_pieces),
            meta={"transform": "min_of", "extra_vars": self.extra_vars},
        )

    def lift(self, points) -> np.ndarray:
        """Append the (v, w) solving the lifting equations at base points."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        a = self.q1.evaluate_many(pts)
        b = self.q2.evaluate_many(pts)
        w = np.abs(a - b)
        v = 0.5 * (a + b - w)
        return np.hstack([pts, v[:, None], w[:, None]])

    def constraint_residual(self, lifted_points) -> np.ndarray:
        """Largest violation of the lifting constraints at each lifted point."""
        worst = np.zeros(len(lifted_points))
        for c in self.extra_constraints:
            v = c.poly.evaluate_many(lifted_points)
            worst = np.maximum(worst, np.abs(v) if c.kind == "eq" else np.maximum(-v, 0.0))
        return worst


def lift_min(q1: Polynomial, q2: Polynomial, base: ProblemSpec) -> LiftedProblem:
    joint0 = base.variables
    if q1.variables != joint0 or q2.variables != joint0:
        raise ValueError(f"q1 and q2 must be over {joint0}")
    vname, wname = "v", "w"
    while vname in joint0 or wname in joint0:
        vname, wname = "_" + vname, "_" + wname
    joint = joint0 + (vname, wname)
    a, b = q1.embed(joint), q2.embed(joint)
    v = Polynomial.variable(joint, vname)
    w = Polynomial.variable(joint, wname)
    radius = max([1.0, math.sqrt(base.y_bound)] + [abs(t) for t in base.box.lower + base.box.upper])
    wmax = _abs_bound(q1 - q2, radius)
    vmax = max(_abs_bound(q1, radius), _abs_bound(q2, radius))
    wmax = max(wmax, 1e-3)
    cons = (
        Constraint(w * w - (a - b) * (a - b), "eq"),
        Constraint(w, "ineq"),
        Constraint(2.0 * v - a - b + w, "eq"),
        Constraint(wmax - w, "ineq"),
    )
    return LiftedProblem(base, q1, q2, (vname, wname), cons, v, base.y_bound + vmax**2 + wmax**2)


def to_scalar(spec: ProblemSpec) -> ProblemSpec:
    """The scalar-objective problem actually handed to the SDP layer."""
    kind = spec.objective.kind
    if kind == "scalar":
        return spec
    if kind == "pmi":
        return pmi_to_scalar(spec)
    if kind == "min_of":
        pieces = spec.objective.pieces
        if len(pieces) != 2:
            raise ValueError("min_of takes exactly two polynomials")
        return lift_min(pieces[0], pieces[1], spec).to_spec()
    raise ValueError("max_of objectives are handled by approximate_intersection")


def split_max_of(spec: ProblemSpec) -> list:
    """One scalar problem per polynomial of a max_of objective."""
    if spec.objective.kind != "max_of":
        raise ValueError("split_max_of needs a max_of objective")
    return [spec.with_(objective=Objective.of(q)) for q in spec.objective.pieces]


# ---------------------------------------------------------------- diagnostics

def sample_value_function_warnings(spec: ProblemSpec, samples: int = 200, seed: int = 0,
                                   grid_resolution: int = 21) -> list:
    """Defensive sampling of two standing assumptions: K_x is nonempty on B,
    and {J = 0} has (numerically) zero measure."""
    if spec.m > 3:
        return []
    if spec.objective.kind == "scalar" and any(c.kind == "eq" for c in spec.all_constraints()):
        return []  # a y-grid cannot hit an equality set
    xs = spec.box.sample(np.random.default_rng([seed, 7]), samples)
    jbar = oracle.value_function_many(spec, xs, grid_resolution)
    msgs = []
    empty = int(np.count_nonzero(np.isneginf(jbar)))
    if empty:
        msgs.append(f"K_x looks empty at {empty} of {samples} sampled x (no feasible y on a "
                    f"{grid_resolution}-point grid)")
    flat = int(np.count_nonzero(np.abs(jbar) <= 1e-6))
    if flat > 0.05 * samples:
        msgs.append(f"the value function vanishes (|J| <= 1e-6) at {flat} of {samples} sampled x; "
                    "the volume convergence guarantee needs {J = 0} to have measure zero")
    return msgs


def _diagnose(result_p: Polynomial, semantic: ProblemSpec, predicate: str, samples: int, seed: int) -> dict:
    out = {}
    try:
        rep = oracle.check_dominance(result_p, semantic, samples, seed)
        out["dominance_violations"] = rep.violation_count
        out["dominance_accepted"] = rep.accepted
    except oracle.ThinSetError as exc:
        out["dominance_error"] = str(exc)
    vol = oracle.mc_volume(lambda pts: predicate_mask(result_p, predicate, pts), semantic.box, samples, seed)
    out["volume_fraction"] = vol.estimate
    out["volume_std_error"] = vol.std_error
    return out


# ---------------------------------------------------------------- hierarchy

def _check_orders(orders, monotone: bool) -> list:
    orders = [int(k) for k in orders]
    if not orders:
        raise ValueError("no orders requested")
    if any(k < 1 for k in orders):
        raise ValueError("orders must be >= 1")
    if len(set(orders)) != len(orders):
        raise ValueError("orders must be distinct")
    if monotone and orders != list(range(orders[0], orders[0] + len(orders))):
        raise ValueError("the monotone option needs a contiguous increasing list of orders")
    return orders


def approximate(spec: ProblemSpec, orders: Sequence[int], monotone: bool = False, convex: bool = False,
                tolerances: conic.Tolerances | None = None, diagnostics: bool = False,
                samples: int = 10_000, seed: int = 0, check_assumptions: bool = True,
                order_offset: int | None = None, symmetry: bool = True,
                monotone_margin: float = 1e-3, monotone_slack: float = 0.0) -> list:
    """Run the hierarchy for every order in ``orders`` (mode taken from the spec).

    p_k has degree 2k; its certificate uses order d = k + order_offset.  The
    default offset is (minimal admissible order - 1), i.e. d = k whenever f
    and all constraints have degree <= 2, and a constant shift otherwise so
    that k = 1 is already well posed.

    A non-optimal solve is recorded in that order's result; later orders are
    still attempted.  With ``monotone`` each p_k is additionally required to
    lie below the last successfully computed p (plus ``monotone_slack``).
    Imposed naively this program has no strictly feasible point: wherever
    p_{k-1} touches the value function, p_k is pinned to it, and
    interior-point solvers stall.  So in monotone mode the i-th of N orders
    certifies p >= f + eta_i with eta_i = monotone_margin * (N - 1 - i); the
    last order is unshifted, every p still dominates f, and consecutive
    orders are separated by a margin at the contact points.
    """
    orders = _check_orders(orders, monotone)
    predicate = PREDICATES[spec.mode]
    scalar = to_scalar(spec)
    msgs = []
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        if scalar.union_pieces:
            sps = [rescale_problem(scalar.with_(constraints=piece, union_pieces=())) for piece in scalar.pieces()]
        else:
            sps = [rescale_problem(scalar)]
    msgs.extend(str(w.message) for w in caught)
    if check_assumptions:
        msgs.extend(sample_value_function_warnings(spec, seed=seed))
    for msg in msgs:
        warnings.warn(msg, stacklevel=2)
    need = certify.minimal_order(sps)
    offset = need - 1 if order_offset is None else int(order_offset)
    results = []
    prev = None
    for i, k in enumerate(orders):
        d = max(k + offset, need)
        if len(sps) == 1:
            prob, tmpl = certify.assemble_inner(sps[0], k, d, symmetry)
        else:
            prob, tmpl = certify.assemble_union(sps, k, d, symmetry)
        meta = {"transform": scalar.meta.get("transform", "none"), "pieces": len(sps)}
        if monotone:
            eta = monotone_margin * (len(orders) - 1 - i)
            prob, tmpl = certify.shift_objective(prob, tmpl, eta)
            meta["objective_shift"] = eta
        if monotone and prev is not None:
            prob, tmpl = certify.add_monotone_constraint(prob, tmpl, prev.p_scaled, monotone_slack)
            meta["monotone_against"] = prev.k
            meta["monotone_slack"] = monotone_slack
        if convex:
            prob, tmpl = certify.add_convexity_constraint(prob, tmpl)
            meta["convex"] = True
        sol = conic.solve(prob, tolerances)
        if not sol.optimal:
            results.append(ApproximationResult(k, d, sol.status, predicate, solve_seconds=sol.solve_seconds,
                                               diagnostics={"message": sol.message}, metadata=meta,
                                               warnings=tuple(msgs), solution=sol, template=tmpl))
            continue
        p_scaled = certify.extract_polynomial(sol, tmpl)
        p = sps[0].to_original(p_scaled)
        diag = {
            "primal_objective": sol.primal_objective,
            "dual_objective": sol.dual_objective,
            "iterations": sol.iterations,
            "certificate_residual": certify.certificate_residual(sol, tmpl, seed=seed),
            "min_gram_eigenvalue": certify.min_gram_eigenvalue(sol, tmpl),
            "raw_min_gram_eigenvalue": sol.min_block_eigenvalue,
            "psd_clip": sol.psd_clip,
        }
        if diagnostics:
            diag.update(_diagnose(p, spec, predicate, samples, seed))
        res = ApproximationResult(k, d, sol.status, predicate, p, p_scaled, sol.primal_objective,
                                  sol.solve_seconds, diag, meta, tuple(msgs), sol, tmpl)
        results.append(res)
        prev = res
    return results


def approximate_inner(spec: ProblemSpec, orders: Sequence[int], **opts) -> list:
    if spec.mode != INNER:
        raise ValueError("approximate_inner needs mode 'inner'")
    return approximate(spec, orders, **opts)


def approximate_outer(spec: ProblemSpec, orders: Sequence[int], **opts) -> list:
    if spec.mode != OUTER:
        raise ValueError("approximate_outer needs mode 'outer'")
    return approximate(spec, orders, **opts)


# ---------------------------------------------------------------- several functions

@dataclass(frozen=True)
class IntersectionResult:
    """One polynomial per f_l at a common order.

    Inner mode: the set is the intersection of {p_l <= 0}.  Outer mode (max
    of several functions): the union of {p_l >= 0}.
    """

    k: int
    mode: str
    parts: tuple  # ApproximationResult per f_l

    @property
    def polynomials(self) -> list:
        return [r.p for r in self.parts]

    @property
    def statuses(self) -> list:
        return [r.status for r in self.parts]

    @property
    def optimal(self) -> bool:
        return all(r.optimal for r in self.parts)

    def contains(self, points) -> np.ndarray:
        masks = [r.contains(points) for r in self.parts]
        return np.logical_and.reduce(masks) if self.mode == INNER else np.logical_or.reduce(masks)


def approximate_intersection(specs, k: int, **opts) -> IntersectionResult:
    """Approximate {x : f_l(x, y) <= 0 for all y, every l} by intersecting the
    per-l inner sets (or, in outer mode, the union of per-l outer sets)."""
    if isinstance(specs, ProblemSpec):
        specs = split_max_of(specs) if specs.objective.kind == "max_of" else [specs]
    specs = list(specs)
    first = specs[0]
    for s in specs[1:]:
        if s.x_vars != first.x_vars or s.box != first.box or s.mode != first.mode:
            raise ValueError("all problems must share the x-variables, box and mode")
        if s.constraints != first.constraints or s.y_vars != first.y_vars:
            raise ValueError("all problems must share the constraint set K")
    parts = tuple(approximate(s, [k], **opts)[0] for s in specs)
    return IntersectionResult(k, first.mode, parts)


# ---------------------------------------------------------------- two quantifiers

@dataclass(frozen=True)
class TwoQuantifierSpec:
    """f(x, y, u) with x in box_x, y in box_y and u in K_xy (constraints over
    (x, y, u), ||u||^2 <= u_bound)."""

    x_vars: tuple
    y_vars: tuple
    u_vars: tuple
    box_x: BoxDomain
    box_y: BoxDomain
    f: Polynomial
    constraints: tuple = ()
    u_bound: float = 1.0

    def __post_init__(self):
        joint = tuple(self.x_vars) + tuple(self.y_vars) + tuple(self.u_vars)
        if self.f.variables != joint:
            raise ValueError(f"f must be over {joint}")
        if not self.y_vars:
            raise ValueError("need at least one y-variable")

    def stage_one(self, mode: str) -> ProblemSpec:
        """(x, y) treated jointly as parameters, u quantified."""
        box = BoxDomain(self.box_x.lower + self.box_y.lower, self.box_x.upper + self.box_y.upper)
        cons = tuple(c if isinstance(c, Constraint) else Constraint(c) for c in self.constraints)
        return ProblemSpec(tuple(self.x_vars) + tuple(self.y_vars), tuple(self.u_vars), box,
                           self.u_bound, cons, Objective.of(self.f), mode)

    def stage_two(self, p1: Polynomial, mode: str) -> ProblemSpec:
        """y quantified over box_y; objective -p1(x, y)."""
        joint = tuple(self.x_vars) + tuple(self.y_vars)
        cons = []
        for i, name in enumerate(self.y_vars):
            yi = Polynomial.variable(joint, name)
            cons.append(Constraint((yi - self.box_y.lower[i]) * (self.box_y.upper[i] - yi)))
        bound = float(sum(max(a * a, b * b) for a, b in zip(self.box_y.lower, self.box_y.upper)))
        return ProblemSpec(tuple(self.x_vars), tuple(self.y_vars), self.box_x, bound, tuple(cons),
                           Objective.of(-p1.embed(joint)), mode)


@dataclass(frozen=True)
class CompositionResult:
    stage1: ApproximationResult
    stage2: ApproximationResult | None
    containment: oracle.SampleReport | None
    metadata: dict = field(default_factory=dict)

    @property
    def optimal(self) -> bool:
        return self.stage1.optimal and self.stage2 is not None and self.stage2.optimal


def _compose(tq: TwoQuantifierSpec, k: int, l: int, stage2_mode: str, samples: int, seed: int,
             grid_resolution: int, **opts) -> CompositionResult:
    s1 = approximate(tq.stage_one(INNER), [k], check_assumptions=False, **opts)[0]
    mapping = {
        INNER: {"stage2_predicate": "le0", "sublevel_form": "q <= 0"},
        OUTER: {"stage2_predicate": "ge0", "sublevel_form": "-q <= 0"},
    }[stage2_mode]
    meta = {"k": k, "l": l, "sign_mapping": mapping}
    if not s1.optimal:
        return CompositionResult(s1, None, None, meta)
    spec2 = tq.stage_two(s1.p, stage2_mode)
    s2 = approximate(spec2, [l], check_assumptions=False, **opts)[0]
    report = None
    if s2.optimal:
        report = _containment(s1.p, s2, spec2, stage2_mode, samples, seed, grid_resolution)
    return CompositionResult(s1, s2, report, meta)


def _containment(p1, s2, spec2, stage2_mode, samples, seed, grid_resolution, tol=1e-6):
    """Sample-check the containment linking the two stages.

    Outer stage 2: every x with some grid y having p1(x, y) <= 0 must satisfy q(x) >= -tol.
    Inner stage 2: every x with q(x) <= 0 must have p1(x, y) >= -tol on the whole y-grid.
    """
    proj = spec2.with_(objective=Objective.of(-p1.embed(spec2.variables)))
    rep = oracle.SampleReport("containment", samples, seed, 0.0, 0.0)
    for rng, size in oracle._chunks(samples, seed):
        xs = spec2.box.sample(rng, size)
        q = s2.p.evaluate_many(xs)
        if stage2_mode == OUTER:
            jbar = oracle.value_function_many(proj, xs, grid_resolution)  # max_y -p1
            inside = jbar >= 0
            bad = inside & (q < -tol)
            rep.accepted += int(inside.sum())
            rep.add_violations(xs[bad], q[bad])
        else:
            inside = q <= 0
            if not inside.any():
                continue
            rep.accepted += int(inside.sum())
            jbar = oracle.value_function_many(proj, xs[inside], grid_resolution)
            bad = jbar > tol
            rep.add_violations(xs[inside][bad], -jbar[bad])
    rep.estimate = rep.accepted / samples
    return rep


def compose_exists_forall(tq: TwoQuantifierSpec, k: int, l: int, samples: int = 10_000, seed: int = 0,
                          grid_resolution: int = 41, **opts) -> CompositionResult:
    """{x : exists y in B_y, f(x, y, u) <= 0 for all u in K_xy}.

    Stage 1 gives p1 >= J_f over (x, y); the set {x : exists y, p1 <= 0} is
    inside the target.  Stage 2 returns q >= max_y -p1(x, y), so
    {q >= 0} contains that set (predicate ``ge0``; equivalently -q <= 0).
    """
    return _compose(tq, k, l, OUTER, samples, seed, grid_resolution, **opts)


def compose_forall_exists(tq: TwoQuantifierSpec, k: int, l: int, samples: int = 10_000, seed: int = 0,
                          grid_resolution: int = 41, **opts) -> CompositionResult:
    """{x : for all y in B_y, exists u in K_xy with f(x, y, u) >= 0}.

    Stage 1 gives p1 >= J_f, so the target lies in {x : p1(x, y) >= 0 for all y}.
    Stage 2 returns q >= max_y -p1(x, y); {q <= 0} is an inner approximation
    of that superset (predicate ``le0``).
    """
    return _compose(tq, k, l, INNER, samples, seed, grid_resolution, **opts)


def example_pmi_matrix() -> PolyMatrix:
    """The 2x2 test matrix with entries 1 - 16 x1 x2, x1, 1 - x1^2 - x2^2."""
    xs = ("x1", "x2")
    x1, x2 = (Polynomial.variable(xs, v) for v in xs)
    a12 = x1
    return PolyMatrix([[1 - 16 * x1 * x2, a12], [a12, 1 - x1 * x1 - x2 * x2]])


def example_pmi_spec(mode: str = INNER) -> ProblemSpec:
    A = example_pmi_matrix()
    return ProblemSpec(A.variables, (), BoxDomain.unit(2), 1.0, (), Objective("pmi", matrix=A), mode)
