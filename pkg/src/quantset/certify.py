"""Assembly of the sum-of-squares programs that produce p_k.

For a rescaled problem (x in [-1, 1]^n, ||y||^2 <= 1) the core program finds
p in R[x]_{2k} minimizing its Lebesgue average over the box subject to

    p - f = sum_j sigma_j g_j + sum_i psi_i theta_i + sum_h tau_h h

with SOS multipliers sigma_j (one per inequality, g_0 = 1 included), SOS
psi_i for theta_i = 1 - x_i^2 and sign-free tau_h for equality constraints.
Multipliers are bounded by a certificate order d >= k (d = k unless the
caller asks for more, see ``minimal_order``).

Sign symmetries are exploited by default: if every polynomial of the data
is invariant under a group of coordinate sign flips, averaging any feasible
point over the group gives an invariant one with the same objective, so p
and the free multipliers are restricted to invariant monomials and each
Gram matrix splits into one block per parity class.
"""
from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field

import numpy as np

from . import conic
from .basis import MonomialBasis, enumerate_monomials
from .measures import ScaledProblem, box_moment
from .poly import Polynomial, hessian_quadratic_form


class DegreeError(ValueError):
    def __init__(self, message, minimal_order):
        super().__init__(f"{message} (minimal admissible order: {minimal_order})")
        self.minimal_order = minimal_order


@dataclass(frozen=True)
class Slot:
    """One multiplier in one polynomial identity."""

    name: str
    identity: str
    kind: str  # "sos" or "free"
    generator: Polynomial
    basis: MonomialBasis
    variables: tuple
    index: int  # first block index (sos) or first free column (free)
    parts: tuple = ()  # sos only: (block index, MonomialBasis) per parity class

    @property
    def blocks(self) -> tuple:
        return self.parts or ((self.index, self.basis),)

    def polynomial(self, solution: conic.SdpSolution) -> Polynomial:
        if self.kind == "sos":
            terms: dict = {}
            for blk, basis in self.blocks:
                X = solution.block_values[blk]
                for a, ma in enumerate(basis):
                    for c, mc in enumerate(basis):
                        e = tuple(x + y for x, y in zip(ma, mc))
                        terms[e] = terms.get(e, 0.0) + X[a, c]
            return Polynomial(self.variables, terms)
        coefs = solution.free_values[self.index : self.index + len(self.basis)]
        return Polynomial(self.variables, dict(zip(self.basis, coefs)))


@dataclass(frozen=True)
class CertificateTemplate:
    k: int
    order: int
    x_vars: tuple
    variables: tuple
    p_basis: MonomialBasis  # x-only monomials of degree <= 2k
    p_start: int
    f: Polynomial
    slots: tuple = ()
    pieces: int = 1
    rows: dict = field(default_factory=dict, compare=False)
    symmetries: tuple = ()
    f_shift: float = 0.0  # main identities certify p - (f + f_shift)

    @property
    def p_columns(self) -> range:
        return range(self.p_start, self.p_start + len(self.p_basis))

    def with_slots(self, extra, rows=None) -> "CertificateTemplate":
        merged = dict(self.rows)
        merged.update(rows or {})
        return CertificateTemplate(
            self.k, self.order, self.x_vars, self.variables, self.p_basis, self.p_start,
            self.f, self.slots + tuple(extra), self.pieces, merged, self.symmetries, self.f_shift,
        )

    def generators_summary(self):
        return [(s.name, s.kind, s.generator, 2 * s.basis.max_degree if s.kind == "sos" else s.basis.max_degree)
                for s in self.slots]


def _half_degree(g: Polynomial) -> int:
    return max(0, math.ceil(g.degree / 2))


def minimal_order(sp: ScaledProblem | list) -> int:
    """Smallest certificate order for which the core program is well posed."""
    sps = sp if isinstance(sp, (list, tuple)) else [sp]
    need = 1
    for s in sps:
        need = max(need, math.ceil(max(s.f.degree, 0) / 2))
        for g in s.generators:
            need = max(need, _half_degree(g.poly))
    return need


def sub_basis(basis: MonomialBasis, keep) -> MonomialBasis:
    monos = tuple(mono for mono in basis if keep(mono))
    return MonomialBasis(basis.n_vars, basis.max_degree, monos, {mono: i for i, mono in enumerate(monos)})


def sign_symmetries(polys, n_vars: int) -> list:
    """Basis (over GF(2)) of the coordinate sign flips leaving every polynomial invariant.

    A flip s in {0, 1}^n maps x_i to -x_i where s_i = 1; it fixes the
    monomial x^e iff s . e is even.
    """
    rows = {tuple(v % 2 for v in e) for q in polys for e, _ in q.items()}
    rows = [r for r in rows if any(r)]
    # row-reduce the parity matrix over GF(2)
    mat = [list(r) for r in rows]
    pivots = []
    r = 0
    for col in range(n_vars):
        piv = next((i for i in range(r, len(mat)) if mat[i][col]), None)
        if piv is None:
            continue
        mat[r], mat[piv] = mat[piv], mat[r]
        for i in range(len(mat)):
            if i != r and mat[i][col]:
                mat[i] = [a ^ b for a, b in zip(mat[i], mat[r])]
        pivots.append(col)
        r += 1
    free = [c for c in range(n_vars) if c not in pivots]
    gens = []
    for fc in free:
        v = [0] * n_vars
        v[fc] = 1
        for i, pc in enumerate(pivots):
            v[pc] = mat[i][fc]
        gens.append(tuple(v))
    return gens


def signature(mono, gens) -> tuple:
    return tuple(sum(a * b for a, b in zip(mono, s)) % 2 for s in gens)


def _x_poly_basis(n: int, m: int, k: int, gens=()):
    xb = enumerate_monomials(n, 2 * k)
    if gens:
        xb = sub_basis(xb, lambda a: not any(signature(tuple(a) + (0,) * m, gens)))
    return xb, [tuple(a) + (0,) * m for a in xb]


def _add_sos_product(b: conic.SdpBuilder, rowmap, block, half: MonomialBasis, g: Polynomial, sign: float):
    gterms = list(g.items())
    for a in range(len(half)):
        ma = half[a]
        for c in range(a, len(half)):
            mc = half[c]
            base = tuple(x + y for x, y in zip(ma, mc))
            factor = sign * (1.0 if a == c else 2.0)
            for ge, gc in gterms:
                row = rowmap[tuple(x + y for x, y in zip(base, ge))]
                b.block_entry(row, block, a, c, factor * gc)


def _add_free_product(b: conic.SdpBuilder, rowmap, start, fb: MonomialBasis, g: Polynomial, sign: float):
    gterms = list(g.items())
    for idx, mono in enumerate(fb):
        for ge, gc in gterms:
            row = rowmap[tuple(x + y for x, y in zip(mono, ge))]
            b.free_entry(row, start + idx, sign * gc)


def _split_by_signature(half: MonomialBasis, gens) -> list:
    if not gens:
        return [half]
    classes: dict = {}
    for mono in half:
        classes.setdefault(signature(mono, gens), []).append(mono)
    return [sub_basis(half, set(v).__contains__) for _, v in sorted(classes.items())]


def _core(sps, k: int, order: int | None, symmetry: bool = True):
    first = sps[0]
    n, m = first.n, first.m
    for s in sps[1:]:
        if s.n != n or s.x_vars != first.x_vars:
            raise ValueError("union pieces must share the x-variables")
        if s.m != m:
            raise ValueError("union pieces must share the y-dimension")
        if not np.allclose(s.x_scale, first.x_scale) or not np.allclose(s.x_shift, first.x_shift):
            raise ValueError("union pieces must share the box B")
        if s.f != first.f:
            raise ValueError("union pieces must share the objective f")
    if k < 1:
        raise DegreeError(f"order k={k} must be at least 1", minimal_order(sps))
    d = k if order is None else order
    need = minimal_order(sps)
    if d < need:
        raise DegreeError(f"certificate order {d} too small for the problem degrees", need)
    if d < k:
        raise DegreeError(f"certificate order {d} below k={k}", k)

    nv = n + m
    variables = first.variables
    gens_sym = []
    if symmetry:
        data = [first.f] + [g.poly for s in sps for g in s.generators] + list(first.thetas)
        gens_sym = sign_symmetries(data, nv)

    def invariant(mono):
        return not any(signature(mono, gens_sym))

    rows_basis = enumerate_monomials(nv, 2 * d)
    if gens_sym:
        rows_basis = sub_basis(rows_basis, invariant)
    b = conic.SdpBuilder()
    xb, p_monos = _x_poly_basis(n, m, k, gens_sym)
    pcols = b.add_free(len(xb), "p")
    for col, a in zip(pcols, xb):
        b.objective[col] = box_moment(a)

    slots = []
    row_maps = {}
    for t, s in enumerate(sps):
        tag = f"[{t}]" if len(sps) > 1 else ""
        ident = f"main{tag}"
        start = b.add_rows(len(rows_basis)).start
        rowmap = {mono: start + i for i, mono in enumerate(rows_basis)}
        row_maps[ident] = (start, rows_basis)
        for col, mono in zip(pcols, p_monos):
            b.free_entry(rowmap[mono], col, 1.0)
        for e, c in s.f.items():
            b.add_rhs(rowmap[e], c)
        one = Polynomial.constant(variables, 1.0)
        gens = [("sigma0", one, "ineq")]
        ineq_i = 0
        eq_i = 0
        for g in s.generators:
            if g.kind == "ineq":
                ineq_i += 1
                gens.append((f"sigma{ineq_i}", g.poly, "ineq"))
            else:
                eq_i += 1
                gens.append((f"tau{eq_i}", g.poly, "eq"))
        gens += [(f"psi{i + 1}", th, "theta") for i, th in enumerate(s.thetas)]
        for name, g, kind in gens:
            if kind == "eq":
                fb = enumerate_monomials(nv, 2 * d - max(g.degree, 0))
                if gens_sym:
                    fb = sub_basis(fb, invariant)
                start_col = b.add_free(len(fb), name + tag).start
                _add_free_product(b, rowmap, start_col, fb, g, -1.0)
                slots.append(Slot(name + tag, ident, "free", g, fb, variables, start_col))
            else:
                hd = d - 1 if kind == "theta" else d - _half_degree(g)
                half = enumerate_monomials(nv, hd)
                parts = []
                for sub in _split_by_signature(half, gens_sym):
                    blk = b.add_block(len(sub), name + tag)
                    _add_sos_product(b, rowmap, blk, sub, g, -1.0)
                    parts.append((blk, sub))
                slots.append(Slot(name + tag, ident, "sos", g, half, variables, parts[0][0], tuple(parts)))
    template = CertificateTemplate(
        k=k, order=d, x_vars=first.x_vars, variables=variables, p_basis=xb,
        p_start=pcols.start, f=first.f, slots=tuple(slots), pieces=len(sps), rows=row_maps,
        symmetries=tuple(gens_sym),
    )
    return b, template


def assemble_inner(sp: ScaledProblem, k: int, order: int | None = None, symmetry: bool = True):
    """Core program for one basic K.  Returns (SdpProblem, CertificateTemplate)."""
    b, template = _core([sp], k, order, symmetry)
    return b.build(), template


def assemble_union(sps, k: int, order: int | None = None, symmetry: bool = True):
    """One p certified separately on every basic piece of K = union of pieces."""
    sps = list(sps)
    if not sps:
        raise ValueError("need at least one piece")
    b, template = _core(sps, k, order, symmetry)
    return b.build(), template


def assemble_dual(sp: ScaledProblem, k: int, order: int | None = None):
    """The moment program: maximize L_z(f) over pseudo-moments z of degree 2d
    with PSD localizing matrices and x-marginal equal to the box moments.

    Returns (SdpProblem, MonomialBasis of z).  The free variables are z in the
    order of the returned basis.
    """
    d = k if order is None else order
    need = minimal_order(sp)
    if k < 1 or d < need or d < k:
        raise DegreeError(f"order k={k}, certificate order {d} not admissible", max(need, k))
    n, m = sp.n, sp.m
    nv = n + m
    zb = enumerate_monomials(nv, 2 * d)
    b = conic.SdpBuilder()
    zcols = b.add_free(len(zb), "z")
    b.maximize = True
    for e, c in sp.f.items():
        b.objective[zb.index[e]] += c

    def localize(g: Polynomial, hd: int, name: str):
        half = enumerate_monomials(nv, hd)
        blk = b.add_block(len(half), name)
        gterms = list(g.items())
        for a in range(len(half)):
            for c in range(a, len(half)):
                row = b.add_rows(1).start
                b.block_entry(row, blk, a, c, 1.0)
                base = tuple(x + y for x, y in zip(half[a], half[c]))
                for ge, gc in gterms:
                    b.free_entry(row, zb.index[tuple(x + y for x, y in zip(base, ge))], -gc)

    localize(Polynomial.constant(sp.variables, 1.0), d, "M0")
    ineq_i = 0
    for g in sp.generators:
        if g.kind == "ineq":
            ineq_i += 1
            localize(g.poly, d - _half_degree(g.poly), f"M{ineq_i}")
        else:
            fb = enumerate_monomials(nv, 2 * d - max(g.poly.degree, 0))
            for mono in fb:
                row = b.add_rows(1).start
                for ge, gc in g.poly.items():
                    b.free_entry(row, zb.index[tuple(x + y for x, y in zip(mono, ge))], gc)
    for i, th in enumerate(sp.thetas):
        localize(th, d - 1, f"theta{i + 1}")
    for a in enumerate_monomials(n, 2 * k):
        row = b.add_rows(1, box_moment(a)).start
        b.free_entry(row, zb.index[tuple(a) + (0,) * m], 1.0)
    return b.build(), zb


def shift_objective(problem: conic.SdpProblem, template: CertificateTemplate, eta: float):
    """Replace f by f + eta in every main identity (p then certifies p >= f + eta on K).

    Returns the new (SdpProblem, CertificateTemplate).
    """
    if not eta:
        return problem, template
    b = conic.SdpBuilder(problem)
    for ident, (start, basis) in template.rows.items():
        if ident.startswith("main"):
            b.add_rhs(start + basis.index[(0,) * basis.n_vars], eta)
    return b.build(), dataclasses.replace(template, f_shift=template.f_shift + eta)


def add_monotone_constraint(problem: conic.SdpProblem, template: CertificateTemplate, p_prev: Polynomial,
                            slack: float = 0.0):
    """Append p_prev + slack - p = phi_0 + sum_i phi_i theta_i with x-only SOS phi's.

    ``p_prev`` is an x-polynomial in the scaled frame; a positive ``slack``
    loosens the constraint.  On its own this program is typically not
    strictly feasible (see ``shift_objective`` and the monotone option of the
    engine).  Returns the new (SdpProblem, CertificateTemplate).
    """
    k = template.k
    n = len(template.x_vars)
    if p_prev.variables != template.x_vars:
        raise ValueError(f"previous polynomial must be over {template.x_vars}")
    if p_prev.degree > 2 * k:
        raise DegreeError(f"previous polynomial has degree {p_prev.degree} > 2k = {2 * k}", (p_prev.degree + 1) // 2)
    b = conic.SdpBuilder(problem)
    xs = template.x_vars
    rows_basis = enumerate_monomials(n, 2 * k)
    start = b.add_rows(len(rows_basis)).start
    rowmap = {mono: start + i for i, mono in enumerate(rows_basis)}
    for col, a in zip(template.p_columns, template.p_basis):
        b.free_entry(rowmap[a], col, 1.0)
    for e, c in p_prev.items():
        b.add_rhs(rowmap[e], c)
    if slack:
        b.add_rhs(rowmap[(0,) * n], slack)
    slots = []
    gens = [("phi0", Polynomial.constant(xs, 1.0), k)]
    for i in range(n):
        e = [0] * n
        e[i] = 2
        gens.append((f"phi{i + 1}", Polynomial(xs, {(0,) * n: 1.0, tuple(e): -1.0}), k - 1))
    for name, g, hd in gens:
        half = enumerate_monomials(n, hd)
        blk = b.add_block(len(half), name)
        _add_sos_product(b, rowmap, blk, half, g, 1.0)
        slots.append(Slot(name, "monotone", "sos", g, half, xs, blk))
    return b.build(), template.with_slots(slots, {"monotone": (start, rows_basis)})


def add_convexity_constraint(problem: conic.SdpProblem, template: CertificateTemplate):
    """Append <u, Hess p(x) u> = omega_0 + sum_i omega_i theta_i + omega_{n+1} (1 - ||u||^2)."""
    k = template.k
    if k < 1:
        raise DegreeError("convexity needs k >= 1", 1)
    xs = template.x_vars
    n = len(xs)
    us = tuple(f"u{i + 1}" for i in range(n))
    while set(us) & set(template.variables):
        us = tuple("_" + u for u in us)
    ext = xs + us
    b = conic.SdpBuilder(problem)
    rows_basis = enumerate_monomials(2 * n, 2 * k)
    start = b.add_rows(len(rows_basis)).start
    rowmap = {mono: start + i for i, mono in enumerate(rows_basis)}
    for col, a in zip(template.p_columns, template.p_basis):
        h = hessian_quadratic_form(Polynomial.monomial(xs, a), us)
        for e, c in h.items():
            b.free_entry(rowmap[e], col, c)
    gens = [("omega0", Polynomial.constant(ext, 1.0), k)]
    for i in range(n):
        e = [0] * (2 * n)
        e[i] = 2
        gens.append((f"omega{i + 1}", Polynomial(ext, {(0,) * (2 * n): 1.0, tuple(e): -1.0}), k - 1))
    ball = {(0,) * (2 * n): 1.0}
    for i in range(n):
        e = [0] * (2 * n)
        e[n + i] = 2
        ball[tuple(e)] = -1.0
    gens.append((f"omega{n + 1}", Polynomial(ext, ball), k - 1))
    slots = []
    for name, g, hd in gens:
        half = enumerate_monomials(2 * n, hd)
        blk = b.add_block(len(half), name)
        _add_sos_product(b, rowmap, blk, half, g, -1.0)
        slots.append(Slot(name, "convex", "sos", g, half, ext, blk))
    return b.build(), template.with_slots(slots, {"convex": (start, rows_basis)})


def extract_polynomial(solution: conic.SdpSolution, template: CertificateTemplate) -> Polynomial:
    """The optimal p (scaled frame, over the x-variables)."""
    if not solution.optimal:
        raise ValueError(f"cannot extract a polynomial from a solve with status {solution.status!r}")
    coefs = solution.free_values[template.p_start : template.p_start + len(template.p_basis)]
    return Polynomial(template.x_vars, dict(zip(template.p_basis, coefs)))


def certificate_polynomials(solution: conic.SdpSolution, template: CertificateTemplate) -> dict:
    return {s.name: s.polynomial(solution) for s in template.slots}


def certificate_residual(solution: conic.SdpSolution, template: CertificateTemplate,
                         samples: int = 1000, seed: int = 0) -> float:
    """Sup over random points of [-1, 1]^(n+m) of |p - f - sum multiplier * generator|,
    taken over every piece's main identity."""
    rng = np.random.default_rng(seed)
    pts = rng.uniform(-1.0, 1.0, size=(samples, len(template.variables)))
    p = extract_polynomial(solution, template).embed(template.variables)
    base = p.evaluate_many(pts) - template.f.evaluate_many(pts) - template.f_shift
    worst = 0.0
    idents = sorted({s.identity for s in template.slots if s.identity.startswith("main")})
    for ident in idents:
        r = base.copy()
        for s in template.slots:
            if s.identity == ident:
                r -= (s.polynomial(solution) * s.generator).evaluate_many(pts)
        worst = max(worst, float(np.max(np.abs(r))))
    return worst


def min_gram_eigenvalue(solution: conic.SdpSolution, template: CertificateTemplate) -> float:
    vals = [float(np.linalg.eigvalsh(solution.block_values[blk])[0])
            for s in template.slots if s.kind == "sos" for blk, _ in s.blocks]
    return min(vals, default=math.inf)
