"""The twelve acceptance criteria, each printing one PASS/FAIL line."""
import math
import time
import warnings
from pathlib import Path

import numpy as np

from quantset import certify, cli, engine, oracle
from quantset.basis import enumerate_monomials
from quantset.measures import rescale_problem
from quantset.poly import Polynomial
from quantset.problem import make_spec

from conftest import X, Y, interval_spec, solve


def test_criterion_01_moments(report_line):
    t0 = time.perf_counter()
    worst = max(oracle.quadrature_moment_check(n, 8) for n in (1, 2, 3))
    elapsed = time.perf_counter() - t0
    ok = worst <= 1e-12 and elapsed < 1.0
    report_line(1, ok, f"max |closed form - Gauss-Legendre| = {worst:.2e} over |a| <= 8, n <= 3 ({elapsed:.2f} s)")
    assert ok


def test_criterion_02_analytic_optima(report_line):
    details, ok = [], True
    x_only = ("x1",)
    for f, target, rho_ref in ((X, Polynomial.variable(x_only, "x1"), 0.0), (Y, Polynomial.constant(x_only, 1.0), 1.0)):
        t0 = time.perf_counter()
        res = solve(interval_spec(f), [1])[0]
        elapsed = time.perf_counter() - t0
        coef_dist = max((abs(c) for _, c in (res.p - target).items()), default=0.0)
        good = res.optimal and abs(res.rho - rho_ref) <= 1e-6 and coef_dist <= 1e-4 and elapsed < 5
        ok &= good
        details.append(f"rho={res.rho:.3e} |p-target|={coef_dist:.1e} {elapsed:.2f}s")
    report_line(2, ok, "f=x: " + details[0] + "; f=y: " + details[1])
    assert ok


def _random_instance(rng):
    n, m, s = (int(v) for v in rng.integers(1, 3, size=3))
    xs = tuple(f"x{i + 1}" for i in range(n))
    ys = tuple(f"y{i + 1}" for i in range(m))
    V = xs + ys
    xv = [Polynomial.variable(V, v) for v in xs]
    yv = [Polynomial.variable(V, v) for v in ys]
    f = Polynomial(V, {mono: float(rng.normal()) for mono in enumerate_monomials(n + m, 2)})
    cons = []
    for _ in range(s):
        c = rng.uniform(-0.3, 0.3, size=m)
        g = Polynomial.constant(V, float(rng.uniform(0.5, 0.8)))
        for yi, ci in zip(yv, c):
            g = g - (yi - float(ci)) * (yi - float(ci))
        g = g - float(rng.uniform(0, 0.3)) * xv[0] * xv[0]
        cons.append(g)
    return make_spec(n, m, f, cons, y_bound=2.0)


def test_criterion_03_no_duality_gap(report_line):
    rng = np.random.default_rng(2024)
    t0 = time.perf_counter()
    gaps = []
    for _ in range(5):
        spec = _random_instance(rng)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            sp = rescale_problem(spec)
        for k in (1, 2):
            prob, tmpl = certify.assemble_inner(sp, k, symmetry=False)
            primal = engine.conic.solve(prob)
            dprob, _ = certify.assemble_dual(sp, k)
            dual = engine.conic.solve(dprob)
            assert primal.optimal and dual.optimal
            gaps.append(abs(primal.primal_objective - dual.primal_objective) / max(1.0, abs(primal.primal_objective)))
    elapsed = time.perf_counter() - t0
    ok = max(gaps) <= 1e-6 and elapsed < 60
    report_line(3, ok, f"max relative primal/dual gap {max(gaps):.2e} over 5 instances x k=1,2 ({elapsed:.1f} s)")
    assert ok


def test_criterion_04_inner_soundness(solved_instances, report_line):
    worst, checked = [], 0
    for name, spec, res in solved_instances:
        if spec.mode != "inner":
            continue
        checked += 1
        joint = oracle.sample_inner_violations(res.p, spec, 100_000, seed=1)
        grid = oracle.check_inner_soundness(res.p, spec, 20_000, seed=2, grid_resolution=101)
        if joint.violation_count or grid.violation_count:
            worst.append((name, joint.violation_count, grid.violation_count))
    ok = not worst
    report_line(4, ok, f"{checked} inner solves, 1e5 joint samples each; violations: {worst or 'none'}")
    assert ok


def test_criterion_05_outer_soundness(solved_instances, report_line):
    bad, checked = [], 0
    for name, spec, res in solved_instances:
        if spec.mode != "outer":
            continue
        checked += 1
        rep = oracle.check_outer_soundness(res.p, spec, 100_000, seed=3, grid_resolution=101, threshold=1e-3)
        if rep.violation_count:
            bad.append((name, rep.violation_count))
    ok = checked > 0 and not bad
    report_line(5, ok, f"{checked} outer solves, 1e5 samples each; violations: {bad or 'none'}")
    assert ok


def test_criterion_06_example_reproduction(pmi_spec, pmi_results, report_line):
    t_solve = sum(r.solve_seconds for r in pmi_results)
    n = 100_000
    target = oracle.mc_volume(lambda pts: oracle.objective_values(pmi_spec, pts) <= 0, pmi_spec.box, n, seed=5)
    ratios, ses = [], []
    for r in pmi_results:
        v = oracle.mc_volume(lambda pts, r=r: r.contains(pts), pmi_spec.box, n, seed=5)
        ratios.append(v.estimate / target.estimate)
        ses.append(v.std_error / target.estimate)
    nondecreasing = all(ratios[i + 1] >= ratios[i] - 2 * math.hypot(ses[i], ses[i + 1]) for i in range(3))
    contained = all(oracle.sample_inner_violations(r.p, pmi_spec, n, seed=6).violation_count == 0
                    for r in pmi_results)
    gain = ratios[3] - ratios[0]
    ok = nondecreasing and contained and gain >= 0.05 and t_solve < 600
    report_line(6, ok, "vol ratios " + ", ".join(f"{v:.3f}" for v in ratios)
                + f" (k=4 - k=1 = {gain:.3f}); contained={contained}; solve time {t_solve:.1f} s")
    assert ok


def _grid_monotone(results, spec, resolution=101):
    pts = spec.box.grid(resolution)
    return max(float(np.max(b.p.evaluate_many(pts) - a.p.evaluate_many(pts)))
               for a, b in zip(results, results[1:]))


def test_criterion_07_monotone(pmi_spec, pmi_monotone, report_line):
    cases = [("pmi", pmi_spec, pmi_monotone)]
    for name, f in (("f=x", X), ("f=xy", X * Y)):
        spec = interval_spec(f)
        cases.append((name, spec, solve(spec, [1, 2, 3, 4], monotone=True)))
    details, ok = [], True
    for name, spec, res in cases:
        assert all(r.optimal for r in res), [r.status for r in res]
        worst = _grid_monotone(res, spec)
        ok &= worst <= 1e-6
        details.append(f"{name}: max(p_k - p_(k-1)) = {worst:.1e}")
    report_line(7, ok, "; ".join(details) + " on 101^n grids, k=1..4")
    assert ok


def test_criterion_08_convexity(pmi_spec, pmi_convex, report_line):
    p = pmi_convex.p
    pts = pmi_spec.box.grid(21)
    hxx = p.diff("x1").diff("x1").evaluate_many(pts)
    hxy = p.diff("x1").diff("x2").evaluate_many(pts)
    hyy = p.diff("x2").diff("x2").evaluate_many(pts)
    H = np.stack([np.stack([hxx, hxy], -1), np.stack([hxy, hyy], -1)], -2)
    analytic = float(np.linalg.eigvalsh(H)[:, 0].min())
    # central differences as an independent check
    h = 1e-4
    fd = np.empty((len(pts), 2, 2))
    for i in range(2):
        for j in range(2):
            ei, ej = np.eye(2)[i] * h, np.eye(2)[j] * h
            fd[:, i, j] = (p.evaluate_many(pts + ei + ej) - p.evaluate_many(pts + ei - ej)
                           - p.evaluate_many(pts - ei + ej) + p.evaluate_many(pts - ei - ej)) / (4 * h * h)
    numeric = float(np.linalg.eigvalsh((fd + fd.transpose(0, 2, 1)) / 2)[:, 0].min())
    ok = pmi_convex.optimal and analytic >= -1e-6 and numeric >= -1e-6
    report_line(8, ok, f"k=3 convex: min Hessian eigenvalue {analytic:.4f} (finite differences {numeric:.4f}) "
                       "on a 21^2 grid")
    assert ok


def test_criterion_09_l1_trend(pmi_spec, pmi_results, linear_x, report_line):
    gaps_pmi = [oracle.l1_gap(r.p, pmi_spec, grid_resolution=101) for r in pmi_results]
    spec_x, res_x = linear_x
    gaps_x = [oracle.l1_gap(r.p, spec_x, grid_resolution=101) for r in res_x]
    ok = all(b <= a + 1e-3 for g in (gaps_pmi, gaps_x) for a, b in zip(g, g[1:]))
    report_line(9, ok, "pmi l1 gaps " + ", ".join(f"{g:.4f}" for g in gaps_pmi)
                + "; f=x l1 gaps " + ", ".join(f"{g:.1e}" for g in gaps_x))
    assert ok


def test_criterion_10_certificate_audit(solved_instances, report_line):
    worst_res, worst_eig, worst_name = 0.0, math.inf, None
    for name, _, res in solved_instances:
        r = certify.certificate_residual(res.solution, res.template, samples=1000, seed=11)
        e = certify.min_gram_eigenvalue(res.solution, res.template)
        if r > worst_res:
            worst_res, worst_name = r, name
        worst_eig = min(worst_eig, e)
    ok = worst_res <= 1e-6 and worst_eig >= -1e-8
    report_line(10, ok, f"{len(solved_instances)} solves: max identity residual {worst_res:.1e} ({worst_name}), "
                        f"min Gram eigenvalue {worst_eig:.1e}")
    assert ok


def test_criterion_11_union(bilinear, bilinear_union, report_line):
    single = [r for r in bilinear[1] if r.k == 3][0]
    union = bilinear_union[1][0]
    diff = abs(single.rho - union.rho)
    ok = single.optimal and union.optimal and diff <= 1e-4
    report_line(11, ok, f"k=3: single box rho={single.rho:.8f}, split union rho={union.rho:.8f}, diff {diff:.1e}")
    assert ok


def test_criterion_12_determinism(tmp_path, report_line):
    problem = str(Path(__file__).resolve().parents[1] / "problems" / "pmi_inner.json")
    outputs = []
    for run in ("a", "b"):
        d = tmp_path / run
        d.mkdir()
        assert cli.main(["solve", "--problem", problem, "--degrees", "1,2", "--out", str(d / "pmi")]) == 0
        assert cli.main(["grid", "--poly", str(d / "pmi.k2.poly.json"), "--resolution", "60",
                         "--out", str(d / "grid.csv")]) == 0
        assert cli.main(["verify", "--problem", problem, "--poly", str(d / "pmi.k2.poly.json"),
                         "--samples", "20000", "--out", str(d / "rep")]) == 0
        assert cli.main(["svg", "--grid", str(d / "grid.csv"), "--out", str(d / "grid.svg")]) == 0
        outputs.append({p.name: p.read_bytes() for p in sorted(d.iterdir()) if not p.name.endswith("timing.json")})
    same = outputs[0].keys() == outputs[1].keys() and all(outputs[0][k] == outputs[1][k] for k in outputs[0])
    report_line(12, same, f"{len(outputs[0])} files (summary, poly, grid, svg, reports) byte-identical across runs")
    assert same
