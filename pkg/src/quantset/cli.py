"""Command line interface: ``quantset solve|verify|grid|svg|figure|report``.

Exit codes: 0 success, 1 solver or verification failure (output files are
still written), 2 bad input (schema errors, bad flags, unsupported shapes).
"""
from __future__ import annotations

import argparse
import json
import math
import sys
import warnings
from pathlib import Path

import numpy as np

from . import conic, engine, oracle
from .grids import evaluate_grid, grid_from_values, read_grid, write_grid
from .poly import Polynomial
from .problem import BoxDomain
from .problemfile import ProblemFileError, load_polynomial, load_problem, write_polynomial
from .svg import write_svg

SUMMARY_SCHEMA = "quantset-summary/1"


class UsageError(Exception):
    """Bad input detected after argument parsing (maps to exit code 2)."""


def _clean(obj):
    """JSON-safe copy: NaN/inf become None, numpy scalars become Python numbers."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else None
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def _dump(obj, path):
    Path(path).write_text(json.dumps(_clean(obj), indent=2, sort_keys=True) + "\n")


def _int_list(text):
    try:
        vals = [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None
    if not vals:
        raise argparse.ArgumentTypeError("empty list")
    return vals


def _float_list(text):
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _load(args):
    try:
        spec = load_problem(args.problem)
    except FileNotFoundError:
        raise UsageError(f"problem file not found: {args.problem}") from None
    except ProblemFileError as exc:
        raise UsageError("invalid problem file " + str(args.problem) + ":\n  " + "\n  ".join(exc.errors)) from None
    if getattr(args, "mode", None):
        spec = spec.with_(mode=args.mode)
    return spec


def _read_poly(path) -> Polynomial:
    try:
        return load_polynomial(path)
    except FileNotFoundError:
        raise UsageError(f"polynomial file not found: {path}") from None
    except (KeyError, ValueError, TypeError) as exc:
        raise UsageError(f"cannot read polynomial file {path}: {exc}") from None


def _box(text, n):
    if text is None:
        return BoxDomain.unit(n)
    try:
        vals = _float_list(text)
    except argparse.ArgumentTypeError as exc:
        raise UsageError(f"--box: {exc}") from None
    if len(vals) == 2 and n > 1:
        vals = vals * n
    if len(vals) != 2 * n:
        raise UsageError(f"--box needs 2 or {2 * n} numbers (lo,hi per coordinate), got {len(vals)}")
    try:
        return BoxDomain(vals[0::2], vals[1::2])
    except ValueError as exc:
        raise UsageError(str(exc)) from None


# ---------------------------------------------------------------- solve

def _entry(res: engine.ApproximationResult, poly_file):
    return {"k": res.k, "order": res.order, "rho_k": res.rho, "status": res.status,
            "predicate": res.predicate, "diagnostics": res.diagnostics, "metadata": res.metadata,
            "poly_file": poly_file}


def cmd_solve(args) -> int:
    spec = _load(args)
    tol = conic.Tolerances(args.feas_tol, args.gap_tol, args.max_iterations)
    prefix = args.out
    Path(prefix).parent.mkdir(parents=True, exist_ok=True)
    opts = dict(convex=args.convex, tolerances=tol, diagnostics=args.diagnostics, samples=args.samples,
                seed=args.seed)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        try:
            if spec.objective.kind == "max_of":
                if args.monotone:
                    raise UsageError("--monotone is not supported for max_of objectives")
                runs = [engine.approximate_intersection(spec, k, **opts) for k in args.degrees]
            else:
                runs = engine.approximate(spec, args.degrees, monotone=args.monotone, **opts)
        except ValueError as exc:
            raise UsageError(str(exc)) from None
    notes = sorted({str(w.message) for w in caught})
    for msg in notes:
        print(f"warning: {msg}", file=sys.stderr)

    entries, timing, ok = [], {}, True
    for run in runs:
        several = isinstance(run, engine.IntersectionResult)
        parts = run.parts if several else (run,)
        items = []
        for l, res in enumerate(parts):
            suffix = f".k{res.k}.f{l}" if several else f".k{res.k}"
            poly_file = None
            if res.p is not None:
                poly_path = Path(f"{prefix}{suffix}.poly.json")
                write_polynomial(res.p, poly_path)
                poly_file = poly_path.name
            items.append(_entry(res, poly_file))
            timing[suffix.lstrip(".")] = res.solve_seconds
            ok &= res.optimal
            print(f"{suffix.lstrip('.')} order={res.order} status={res.status} rho={res.rho:.10g}")
        if several:
            entries.append({"k": run.k, "status": "optimal" if run.optimal else "failed",
                            "rho_k": [e["rho_k"] for e in items], "parts": items})
        else:
            entries.extend(items)
    summary = {
        "schema": SUMMARY_SCHEMA,
        "problem": Path(args.problem).name,
        "mode": spec.mode,
        "predicate": engine.PREDICATES[spec.mode],
        "objective": spec.objective.kind,
        "degrees": list(args.degrees),
        "monotone": bool(args.monotone),
        "convex": bool(args.convex),
        "seed": args.seed,
        "tolerances": {"feasibility": tol.feasibility, "duality_gap": tol.duality_gap,
                       "max_iterations": tol.max_iterations},
        "warnings": notes,
        "orders": entries,
        "all_optimal": bool(ok),
    }
    _dump(summary, f"{prefix}.summary.json")
    _dump({"solve_seconds": timing}, f"{prefix}.timing.json")
    return 0 if ok else 1


# ---------------------------------------------------------------- verify

def cmd_verify(args) -> int:
    spec = _load(args)
    p = _read_poly(args.poly)
    if spec.objective.kind == "max_of":
        pieces = engine.split_max_of(spec)
        if not 0 <= args.piece < len(pieces):
            raise UsageError(f"--piece must be in 0..{len(pieces) - 1}")
        spec = pieces[args.piece]
    if p.variables != spec.x_vars:
        if p.n_vars != spec.n:
            raise UsageError(f"polynomial has {p.n_vars} variables, problem has n = {spec.n}")
        p = Polynomial(spec.x_vars, p.terms)
    prefix = args.out
    Path(prefix).parent.mkdir(parents=True, exist_ok=True)
    failed = False

    try:
        dom = oracle.check_dominance(p, spec, args.samples, args.seed)
    except oracle.ThinSetError as exc:
        raise UsageError(str(exc)) from None
    _dump(dom.to_dict(), f"{prefix}.dominance.json")
    failed |= dom.violation_count > 0

    for pred in ("le0", "ge0"):
        vol = oracle.mc_volume(lambda pts, pred=pred: engine.predicate_mask(p, pred, pts), spec.box,
                               args.samples, args.seed)
        rep = vol.to_dict()
        rep["predicate"] = pred
        rep["box_volume"] = spec.box.volume
        _dump(rep, f"{prefix}.volume_{pred}.json")

    if spec.mode == "inner":
        snd = oracle.check_inner_soundness(p, spec, args.samples, args.seed, args.y_resolution)
    else:
        snd = oracle.check_outer_soundness(p, spec, args.samples, args.seed, args.y_resolution)
    _dump(snd.to_dict(), f"{prefix}.soundness.json")
    failed |= snd.violation_count > 0

    gv = oracle.gap_volume(p, spec, args.samples, args.seed, args.y_resolution)
    _dump(gv.to_dict(), f"{prefix}.gap_volume.json")

    gap = {"kind": "l1_gap", "seed": args.seed, "grid_resolution": args.grid_resolution,
           "y_resolution": args.y_resolution, "estimate": None, "error": None}
    if dom.violation_count:
        gap["error"] = "skipped: polynomial does not dominate the objective on K"
    else:
        try:
            gap["estimate"] = oracle.l1_gap(p, spec, args.grid_resolution, args.y_resolution,
                                            args.samples, args.seed)
        except oracle.DominanceError as exc:
            gap["error"] = str(exc)
            failed = True
    _dump(gap, f"{prefix}.l1_gap.json")

    print(f"dominance violations: {dom.violation_count} of {dom.accepted} accepted samples")
    print(f"soundness violations ({spec.mode}): {snd.violation_count}")
    print(f"volume between approximation and target: {gv.estimate:.6f} +- {gv.std_error:.6f}")
    print(f"l1 gap: {gap['estimate'] if gap['estimate'] is not None else gap['error']}")
    print("verification " + ("FAILED" if failed else "passed"))
    return 1 if failed else 0


# ---------------------------------------------------------------- grid / svg / figure

def _target_grid(spec, resolution, y_resolution, predicate=None):
    """Oracle grid of the value function (the quantified set itself)."""
    predicate = predicate or engine.PREDICATES[spec.mode]
    if spec.objective.kind == "max_of":
        vals = np.max([oracle.value_function_many(s, spec.box.grid(resolution), y_resolution)
                       for s in engine.split_max_of(spec)], axis=0)
    else:
        vals = oracle.value_function_many(spec, spec.box.grid(resolution), y_resolution)
    return grid_from_values(spec.box, resolution, vals, predicate)


def cmd_grid(args) -> int:
    if args.resolution < 2:
        raise UsageError("--resolution must be at least 2")
    if args.problem:
        spec = _load(args)
        if args.box:
            raise UsageError("--box cannot be combined with --problem (the problem's box is used)")
        grid = _target_grid(spec, args.resolution, args.y_resolution, args.predicate)
    else:
        polys = [_read_poly(f) for f in args.poly]
        n = polys[0].n_vars
        if any(q.n_vars != n for q in polys):
            raise UsageError("all polynomials must have the same number of variables")
        grid = evaluate_grid(polys, _box(args.box, n), args.resolution, args.predicate or "le0")
    write_grid(grid, args.out)
    print(f"{len(grid.values)} rows, member fraction {grid.member_fraction:.6f}")
    if args.figure:
        _figure([grid], args.figure, [Path(args.out).stem], None)
    return 0


def _grids(args):
    out = []
    for f in [args.grid, *(args.overlay or [])]:
        try:
            out.append(read_grid(f))
        except FileNotFoundError:
            raise UsageError(f"grid file not found: {f}") from None
        except ValueError as exc:
            raise UsageError(str(exc)) from None
    for g in out:
        if g.n != 2:
            raise UsageError(f"figures need n = 2 grids, got n = {g.n}")
    labels = args.labels.split(",") if args.labels else [Path(f).stem for f in [args.grid, *(args.overlay or [])]]
    if len(labels) != len(out):
        raise UsageError("--labels needs one label per grid")
    return out, labels


def _figure(grids, path, labels, title):
    from .figures import plot_grids

    plot_grids(grids, path, labels, title)


def cmd_svg(args) -> int:
    grids, labels = _grids(args)
    write_svg(grids, args.out, labels)
    return 0


def cmd_figure(args) -> int:
    grids, labels = _grids(args)
    _figure(grids, args.out, labels, args.title)
    return 0


def cmd_report(args) -> int:
    """Target-set grid plus one grid per polynomial, then SVG and PNG overlays."""
    spec = _load(args)
    predicate = engine.PREDICATES[spec.mode]
    prefix = args.out
    Path(prefix).parent.mkdir(parents=True, exist_ok=True)
    grids = [_target_grid(spec, args.resolution, args.y_resolution)]
    labels = ["target set"]
    write_grid(grids[0], f"{prefix}.target.csv")
    for f in args.poly:
        p = _read_poly(f)
        if p.n_vars != spec.n:
            raise UsageError(f"{f}: polynomial has {p.n_vars} variables, problem has n = {spec.n}")
        g = evaluate_grid(p, spec.box, args.resolution, predicate)
        name = Path(f).name.removesuffix(".json").removesuffix(".poly")
        write_grid(g, f"{prefix}.{name}.csv")
        grids.append(g)
        labels.append(name)
    for g, label in zip(grids, labels):
        print(f"{label}: member fraction {g.member_fraction:.6f}")
    if spec.n != 2:
        print("n != 2: figures skipped")
        return 0
    write_svg(grids, f"{prefix}.svg", labels)
    _figure(grids, f"{prefix}.png", labels, args.title)
    return 0


# ---------------------------------------------------------------- parser

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="quantset", description="Polynomial approximations of quantified sets.")
    sub = ap.add_subparsers(dest="command", required=True)

    s = sub.add_parser("solve", help="run the SOS hierarchy at the requested orders")
    s.add_argument("--problem", required=True)
    s.add_argument("--degrees", required=True, type=_int_list, help="comma-separated orders k, e.g. 1,2,3")
    s.add_argument("--mode", choices=["inner", "outer"], help="override the problem file's mode")
    s.add_argument("--monotone", action="store_true")
    s.add_argument("--convex", action="store_true")
    s.add_argument("--feas-tol", type=float, default=1e-8)
    s.add_argument("--gap-tol", type=float, default=1e-8)
    s.add_argument("--max-iterations", type=int, default=200)
    s.add_argument("--diagnostics", action="store_true", help="add sampled dominance/volume to the summary")
    s.add_argument("--samples", type=int, default=10_000)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", required=True, help="output prefix")
    s.set_defaults(func=cmd_solve)

    v = sub.add_parser("verify", help="sampling checks of a polynomial against a problem")
    v.add_argument("--problem", required=True)
    v.add_argument("--poly", required=True)
    v.add_argument("--mode", choices=["inner", "outer"])
    v.add_argument("--piece", type=int, default=0, help="which f_l of a max_of objective")
    v.add_argument("--samples", type=int, default=100_000)
    v.add_argument("--seed", type=int, default=0)
    v.add_argument("--grid-resolution", type=int, default=41)
    v.add_argument("--y-resolution", type=int, default=101)
    v.add_argument("--out", required=True, help="output prefix")
    v.set_defaults(func=cmd_verify)

    g = sub.add_parser("grid", help="evaluate a polynomial (or the oracle value function) on a grid")
    src = g.add_mutually_exclusive_group(required=True)
    src.add_argument("--poly", nargs="+", help="one or more polynomial files (combined by max)")
    src.add_argument("--problem", help="grid the value function of a problem instead")
    g.add_argument("--mode", choices=["inner", "outer"])
    g.add_argument("--box", help="lo1,hi1,lo2,hi2,... or lo,hi for every coordinate (default [-1,1]^n)")
    g.add_argument("--resolution", type=int, required=True)
    g.add_argument("--predicate", choices=["le0", "ge0"])
    g.add_argument("--y-resolution", type=int, default=101)
    g.add_argument("--figure", help="also write a PNG (n = 2 only)")
    g.add_argument("--out", required=True)
    g.set_defaults(func=cmd_grid)

    for name, func, helptext in (("svg", cmd_svg, "zero contours and regions of 2-D grids as SVG"),
                                 ("figure", cmd_figure, "the same picture as a matplotlib PNG")):
        f = sub.add_parser(name, help=helptext)
        f.add_argument("--grid", required=True)
        f.add_argument("--overlay", action="append", help="additional grid (repeatable)")
        f.add_argument("--labels", help="comma-separated legend labels, one per grid")
        if name == "figure":
            f.add_argument("--title")
        f.add_argument("--out", required=True)
        f.set_defaults(func=func)

    r = sub.add_parser("report", help="grids, SVG and PNG comparing solved polynomials with the target set")
    r.add_argument("--problem", required=True)
    r.add_argument("--poly", nargs="+", required=True)
    r.add_argument("--mode", choices=["inner", "outer"])
    r.add_argument("--resolution", type=int, default=200)
    r.add_argument("--y-resolution", type=int, default=101)
    r.add_argument("--title")
    r.add_argument("--out", required=True, help="output prefix")
    r.set_defaults(func=cmd_report)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
