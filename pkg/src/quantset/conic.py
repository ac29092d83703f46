"""Solver-neutral SDP representation and the default interior-point backend.

An :class:`SdpProblem` has a vector of free variables and a list of symmetric
PSD block variables ``X_b``.  Each equality row reads

    sum_c a_c * free_c + sum_b sum_{i <= j} a_bij * X_b[i, j] == rhs

with every upper-triangle entry counted once (so an off-diagonal Gram entry
appearing twice in a product carries coefficient 2).  The objective is linear
in the free variables only.
"""
from __future__ import annotations

import math
import time
from collections import defaultdict
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"
NUMERICAL_FAILURE = "numerical_failure"
MAX_ITERATIONS = "max_iterations"


class SdpValidationError(ValueError):
    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__("invalid SDP: " + "; ".join(self.errors))


@dataclass(frozen=True)
class Tolerances:
    feasibility: float = 1e-8
    duality_gap: float = 1e-8
    max_iterations: int = 200


@dataclass(frozen=True)
class SdpProblem:
    n_free: int
    block_sizes: tuple
    n_rows: int
    # coalesced COO data for the free part: (row, col, value)
    free_rows: np.ndarray
    free_cols: np.ndarray
    free_vals: np.ndarray
    # coalesced block data: (row, block, i, j, value) with i <= j expected
    blk_rows: np.ndarray
    blk_ids: np.ndarray
    blk_i: np.ndarray
    blk_j: np.ndarray
    blk_vals: np.ndarray
    rhs: np.ndarray
    objective: np.ndarray
    maximize: bool = False
    objective_constant: float = 0.0
    labels: dict = field(default_factory=dict, compare=False)

    @property
    def n_blocks(self) -> int:
        return len(self.block_sizes)

    @classmethod
    def empty(cls) -> "SdpProblem":
        return SdpBuilder().build()


class SdpBuilder:
    """Mutable accumulator producing an immutable :class:`SdpProblem`."""

    def __init__(self, base: SdpProblem | None = None):
        self.n_free = 0
        self.block_sizes: list = []
        self.rhs: list = []
        self._free: dict = defaultdict(float)
        self._blk: dict = defaultdict(float)
        self.objective: dict = defaultdict(float)
        self.maximize = False
        self.objective_constant = 0.0
        self.labels: dict = {}
        if base is not None:
            self.n_free = base.n_free
            self.block_sizes = list(base.block_sizes)
            self.rhs = list(base.rhs)
            for r, c, v in zip(base.free_rows, base.free_cols, base.free_vals):
                self._free[(int(r), int(c))] += float(v)
            for r, b, i, j, v in zip(base.blk_rows, base.blk_ids, base.blk_i, base.blk_j, base.blk_vals):
                self._blk[(int(r), int(b), int(i), int(j))] += float(v)
            for c, v in enumerate(base.objective):
                if v:
                    self.objective[c] = float(v)
            self.maximize = base.maximize
            self.objective_constant = base.objective_constant
            self.labels = dict(base.labels)

    def add_free(self, count: int, label: str | None = None) -> range:
        start = self.n_free
        self.n_free += count
        if label:
            self.labels[label] = ("free", start, self.n_free)
        return range(start, self.n_free)

    def add_block(self, size: int, label: str | None = None) -> int:
        self.block_sizes.append(size)
        idx = len(self.block_sizes) - 1
        if label:
            self.labels[label] = ("block", idx)
        return idx

    def add_rows(self, count: int, rhs=0.0) -> range:
        start = len(self.rhs)
        if np.ndim(rhs) == 0:
            self.rhs.extend([float(rhs)] * count)
        else:
            self.rhs.extend(float(v) for v in rhs)
        return range(start, len(self.rhs))

    def add_rhs(self, row: int, value: float):
        self.rhs[row] += value

    def free_entry(self, row: int, col: int, value: float):
        self._free[(row, col)] += value

    def block_entry(self, row: int, block: int, i: int, j: int, value: float):
        if i > j:
            i, j = j, i
        self._blk[(row, block, i, j)] += value

    def build(self) -> SdpProblem:
        fk = sorted(k for k, v in self._free.items() if v != 0.0)
        bk = sorted(k for k, v in self._blk.items() if v != 0.0)
        obj = np.zeros(self.n_free)
        for c, v in self.objective.items():
            obj[c] = v

        def col(keys, pos, dtype=np.int64):
            return np.array([k[pos] for k in keys], dtype=dtype)

        return SdpProblem(
            n_free=self.n_free,
            block_sizes=tuple(self.block_sizes),
            n_rows=len(self.rhs),
            free_rows=col(fk, 0),
            free_cols=col(fk, 1),
            free_vals=np.array([self._free[k] for k in fk], dtype=float),
            blk_rows=col(bk, 0),
            blk_ids=col(bk, 1),
            blk_i=col(bk, 2),
            blk_j=col(bk, 3),
            blk_vals=np.array([self._blk[k] for k in bk], dtype=float),
            rhs=np.array(self.rhs, dtype=float),
            objective=obj,
            maximize=self.maximize,
            objective_constant=self.objective_constant,
            labels=dict(self.labels),
        )


@dataclass
class ValidationReport:
    errors: list

    @property
    def ok(self) -> bool:
        return not self.errors

    def __bool__(self):
        return self.ok


def validate(problem: SdpProblem) -> ValidationReport:
    """Check index bounds, triangle references, block sizes and duplicate rows."""
    errors = []
    for b, s in enumerate(problem.block_sizes):
        if s < 1:
            errors.append(f"empty PSD block: block {b} has size {s}")
    if len(problem.rhs) != problem.n_rows:
        errors.append(f"rhs has length {len(problem.rhs)} but there are {problem.n_rows} rows")
    if len(problem.objective) != problem.n_free:
        errors.append("objective length differs from the number of free variables")
    for r, c in zip(problem.free_rows, problem.free_cols):
        if not 0 <= r < problem.n_rows:
            errors.append(f"index out of range: row {r}")
        if not 0 <= c < problem.n_free:
            errors.append(f"index out of range: free variable {c} (have {problem.n_free})")
    for r, b, i, j in zip(problem.blk_rows, problem.blk_ids, problem.blk_i, problem.blk_j):
        if not 0 <= r < problem.n_rows:
            errors.append(f"index out of range: row {r}")
        if not 0 <= b < problem.n_blocks:
            errors.append(f"index out of range: block {b}")
            continue
        s = problem.block_sizes[b]
        if not (0 <= i < s and 0 <= j < s):
            errors.append(f"index out of range: entry ({i}, {j}) of block {b} (size {s})")
        if i > j:
            errors.append(f"lower-triangle reference ({i}, {j}) in block {b}; use the upper triangle")
    if not errors:
        rows: dict = defaultdict(list)
        for r, c, v in zip(problem.free_rows, problem.free_cols, problem.free_vals):
            rows[int(r)].append(("f", int(c), -1, float(v)))
        for r, b, i, j, v in zip(problem.blk_rows, problem.blk_ids, problem.blk_i, problem.blk_j, problem.blk_vals):
            rows[int(r)].append((int(b), int(i), int(j), float(v)))
        seen = {}
        for r in sorted(rows):
            key = (tuple(sorted(rows[r], key=str)), float(problem.rhs[r]))
            if key in seen:
                errors.append(f"duplicate equality row: rows {seen[key]} and {r}")
            else:
                seen[key] = r
        for r in range(problem.n_rows):
            if r not in rows and problem.rhs[r] != 0.0:
                errors.append(f"row {r} has no variables but nonzero right-hand side")
    return ValidationReport(errors)


@dataclass
class SdpSolution:
    status: str
    primal_objective: float
    dual_objective: float
    free_values: np.ndarray
    block_values: list
    dual_equality_values: np.ndarray
    iterations: int = 0
    solve_seconds: float = 0.0
    primal_residual: float = math.nan
    min_block_eigenvalue: float = math.nan  # before the PSD projection
    psd_clip: float = 0.0  # largest negative eigenvalue removed by the projection
    message: str = ""

    @property
    def optimal(self) -> bool:
        return self.status == OPTIMAL


def _svec_offsets(sizes):
    offs, tot = [], 0
    for s in sizes:
        offs.append(tot)
        tot += s * (s + 1) // 2
    return offs, tot


def _svec_index(i, j):
    # column-major upper triangle, as used by clarabel's PSDTriangleConeT
    return j * (j + 1) // 2 + i


_STATUS_MAP = {
    "Solved": OPTIMAL,
    "PrimalInfeasible": INFEASIBLE,
    "DualInfeasible": UNBOUNDED,
    "MaxIterations": MAX_ITERATIONS,
    "MaxTime": MAX_ITERATIONS,
}


def solve(problem: SdpProblem, tolerances: Tolerances | None = None) -> SdpSolution:
    """Solve with clarabel; statuses other than ``optimal`` are reported, never hidden."""
    import clarabel

    tol = tolerances or Tolerances()
    report = validate(problem)
    if not report.ok:
        raise SdpValidationError(report.errors)

    nf = problem.n_free
    offs, nsvec = _svec_offsets(problem.block_sizes)
    nvar = nf + nsvec
    sqrt2 = math.sqrt(2.0)

    rows = [problem.free_rows]
    cols = [problem.free_cols]
    vals = [problem.free_vals]
    if len(problem.blk_rows):
        bi, bj = problem.blk_i, problem.blk_j
        bcol = nf + np.array(offs, dtype=np.int64)[problem.blk_ids] + bj * (bj + 1) // 2 + bi
        rows.append(problem.blk_rows)
        cols.append(bcol)
        vals.append(np.where(bi == bj, problem.blk_vals, problem.blk_vals / sqrt2))
    neq = problem.n_rows
    cone_rows = neq + np.arange(nsvec)
    rows.append(cone_rows)
    cols.append(nf + np.arange(nsvec))
    vals.append(-np.ones(nsvec))
    A = sp.csc_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(neq + nsvec, nvar),
    )
    b = np.concatenate([problem.rhs, np.zeros(nsvec)])
    q = np.zeros(nvar)
    q[:nf] = -problem.objective if problem.maximize else problem.objective
    P = sp.csc_matrix((nvar, nvar))
    cones = []
    if neq:
        cones.append(clarabel.ZeroConeT(neq))
    for s in problem.block_sizes:
        cones.append(clarabel.PSDTriangleConeT(s))

    settings = clarabel.DefaultSettings()
    settings.verbose = False
    settings.tol_feas = tol.feasibility
    settings.tol_gap_abs = tol.duality_gap
    settings.tol_gap_rel = tol.duality_gap
    settings.max_iter = int(tol.max_iterations)
    settings.max_threads = 1

    t0 = time.perf_counter()
    try:
        result = clarabel.DefaultSolver(P, q, A, b, cones, settings).solve()
    except BaseException as exc:  # the Rust core reports internal failures as panics
        if isinstance(exc, (KeyboardInterrupt, SystemExit)):
            raise
        return SdpSolution(
            status=NUMERICAL_FAILURE, primal_objective=math.nan, dual_objective=math.nan,
            free_values=np.full(nf, math.nan), block_values=[], dual_equality_values=np.full(problem.n_rows, math.nan),
            solve_seconds=time.perf_counter() - t0, message=f"solver error: {exc}",
        )
    elapsed = time.perf_counter() - t0
    raw = str(result.status)
    status = _STATUS_MAP.get(raw, NUMERICAL_FAILURE)

    x = np.array(result.x, dtype=float)
    z = np.array(result.z, dtype=float)
    free = x[:nf]
    blocks = []
    raw_eigs = []
    clipped = 0.0
    for bidx, s in enumerate(problem.block_sizes):
        X = np.zeros((s, s))
        base = nf + offs[bidx]
        for j in range(s):
            for i in range(j + 1):
                v = x[base + _svec_index(i, j)]
                if i == j:
                    X[i, i] = v
                else:
                    X[i, j] = X[j, i] = v / sqrt2
        # x meets the equalities to ~1e-12 but may leave the cone by ~tol_feas;
        # project onto the PSD cone and record how much was removed
        w, V = np.linalg.eigh(X)
        raw_eigs.append(float(w[0]))
        if w[0] < 0:
            clipped = max(clipped, float(-w[0]))
            X = (V * np.maximum(w, 0.0)) @ V.T
            X = (X + X.T) / 2
        blocks.append(X)
    sign = -1.0 if problem.maximize else 1.0
    primal = sign * float(result.obj_val) + problem.objective_constant
    dual = sign * float(result.obj_val_dual) + problem.objective_constant
    eq_duals = -z[:neq] * sign
    resid = float(np.max(np.abs(A[:neq] @ x - problem.rhs))) if neq else 0.0
    min_eig = min(raw_eigs, default=math.inf)
    return SdpSolution(
        status=status,
        primal_objective=primal,
        dual_objective=dual,
        free_values=free,
        block_values=blocks,
        dual_equality_values=eq_duals,
        iterations=int(result.iterations),
        solve_seconds=elapsed,
        primal_residual=resid,
        min_block_eigenvalue=min_eig,
        psd_clip=clipped,
        message=raw,
    )


def dump_sdpa(problem: SdpProblem) -> str:
    """Sparse SDPA-like text: block 0 holds the free variables as a diagonal
    block, row 0 is the objective, rows 1.. are the equalities."""
    lines = ["* quantset sparse SDP dump" + (" (maximize)" if problem.maximize else " (minimize)")]
    lines.append(f"{problem.n_rows} = equality rows")
    lines.append(f"{problem.n_blocks + 1} = blocks")
    lines.append(" ".join([str(-problem.n_free)] + [str(s) for s in problem.block_sizes]))
    lines.append(" ".join(repr(float(v)) for v in problem.rhs))
    for c, v in enumerate(problem.objective):
        if v:
            lines.append(f"0 0 {c + 1} {c + 1} {float(v)!r}")
    for r, c, v in zip(problem.free_rows, problem.free_cols, problem.free_vals):
        lines.append(f"{r + 1} 0 {c + 1} {c + 1} {float(v)!r}")
    for r, b, i, j, v in zip(problem.blk_rows, problem.blk_ids, problem.blk_i, problem.blk_j, problem.blk_vals):
        lines.append(f"{r + 1} {b + 1} {i + 1} {j + 1} {float(v)!r}")
    return "\n".join(lines) + "\n"
