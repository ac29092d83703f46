import json
from pathlib import Path

import numpy as np
import pytest

from quantset import cli
from quantset.grids import evaluate_grid, read_grid, write_grid
from quantset.poly import Polynomial
from quantset.problem import BoxDomain
from quantset.problemfile import PROBLEM_SCHEMA, ProblemFileError, load_problem, parse_problem
from quantset.svg import marching_squares, render_svg

PROBLEMS = Path(__file__).resolve().parents[1] / "problems"


def run(*args):
    return cli.main([str(a) for a in args])


def write_poly(path, variables, terms):
    Path(path).write_text(json.dumps(Polynomial(variables, terms).to_dict()))
    return path


@pytest.mark.parametrize("name", sorted(p.name for p in PROBLEMS.glob("*.json")))
def test_shipped_problem_files_validate(name):
    spec = load_problem(PROBLEMS / name)
    assert spec.n >= 1


@pytest.mark.parametrize("name", ["pmi_inner.json", "bilinear_union.json", "min_of.json"])
def test_problem_file_round_trip(tmp_path, name):
    from quantset.problemfile import write_problem

    spec = load_problem(PROBLEMS / name)
    write_problem(spec, tmp_path / name)
    assert load_problem(tmp_path / name) == spec


def test_schema_rejects_missing_and_unknown_keys():
    doc = json.loads((PROBLEMS / "linear_x.json").read_text())
    del doc["y_bound"]
    doc["colour"] = "red"
    with pytest.raises(ProblemFileError) as err:
        parse_problem(doc)
    text = "\n".join(err.value.errors)
    assert "y_bound" in text and "colour" in text
    assert PROBLEM_SCHEMA["properties"]["schema"]["const"] == "quantset-problem/1"


def test_schema_consistency_errors():
    doc = json.loads((PROBLEMS / "linear_x.json").read_text())
    doc["objective"]["scalar"]["terms"][0]["exps"] = [1]
    doc["objective"]["scalar"]["vars"] = ["x1", "y1"]
    with pytest.raises(ProblemFileError, match=r"objective\.scalar\.terms\[0\]\.exps"):
        parse_problem(doc)
    doc = json.loads((PROBLEMS / "linear_x.json").read_text())
    doc["box"]["lower"] = [2.0]
    with pytest.raises(ProblemFileError, match="lower < upper"):
        parse_problem(doc)


def test_solve_missing_field_exit_2(tmp_path, capsys):
    doc = json.loads((PROBLEMS / "linear_x.json").read_text())
    del doc["y_bound"]
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps(doc))
    assert run("solve", "--problem", bad, "--degrees", "1", "--out", tmp_path / "o") == 2
    assert "y_bound" in capsys.readouterr().err


def test_solve_linear_x_and_round_trip(tmp_path):
    out = tmp_path / "lin"
    assert run("solve", "--problem", PROBLEMS / "linear_x.json", "--degrees", "1", "--out", out) == 0
    summary = json.loads((tmp_path / "lin.summary.json").read_text())
    assert summary["orders"][0]["status"] == "optimal"
    assert abs(summary["orders"][0]["rho_k"]) < 1e-6
    assert "solve_seconds" in json.loads((tmp_path / "lin.timing.json").read_text())
    raw = json.loads((tmp_path / "lin.k1.poly.json").read_text())
    p = Polynomial.from_dict(raw)
    assert Polynomial.from_dict(p.to_dict()).terms == p.terms
    assert p.to_dict() == raw


def test_solve_failure_exit_1(tmp_path):
    assert run("solve", "--problem", PROBLEMS / "bilinear.json", "--degrees", "1,2", "--max-iterations", "2",
               "--out", tmp_path / "f") == 1
    summary = json.loads((tmp_path / "f.summary.json").read_text())
    assert [o["status"] for o in summary["orders"]] == ["max_iterations"] * 2
    assert summary["all_optimal"] is False


def test_solve_max_of_writes_one_file_per_function(tmp_path):
    assert run("solve", "--problem", PROBLEMS / "max_of.json", "--degrees", "1", "--out", tmp_path / "m") == 0
    assert (tmp_path / "m.k1.f0.poly.json").exists() and (tmp_path / "m.k1.f1.poly.json").exists()


def test_solve_rejects_noncontiguous_monotone(tmp_path):
    assert run("solve", "--problem", PROBLEMS / "linear_x.json", "--degrees", "1,3", "--monotone",
               "--out", tmp_path / "m") == 2


def test_verify_pass_and_corrupted(tmp_path):
    assert run("solve", "--problem", PROBLEMS / "linear_y.json", "--degrees", "1", "--out", tmp_path / "y") == 0
    assert run("verify", "--problem", PROBLEMS / "linear_y.json", "--poly", tmp_path / "y.k1.poly.json",
               "--samples", "20000", "--out", tmp_path / "v") == 0
    gap = json.loads((tmp_path / "v.l1_gap.json").read_text())
    assert abs(gap["estimate"]) < 1e-6
    for name in ("dominance", "volume_le0", "volume_ge0", "soundness", "gap_volume", "l1_gap"):
        assert json.loads((tmp_path / f"v.{name}.json").read_text())["seed"] == 0
    p = Polynomial.from_dict(json.loads((tmp_path / "y.k1.poly.json").read_text()))
    (tmp_path / "bad.json").write_text(json.dumps((p - 1).to_dict()))
    assert run("verify", "--problem", PROBLEMS / "linear_y.json", "--poly", tmp_path / "bad.json",
               "--samples", "20000", "--out", tmp_path / "b") == 1
    dom = json.loads((tmp_path / "b.dominance.json").read_text())
    assert dom["violation_count"] > 0 and dom["violations"]


def test_grid_half_plane(tmp_path):
    poly = write_poly(tmp_path / "p.json", ("x1", "x2"), {(1, 0): 1.0})
    assert run("grid", "--poly", poly, "--resolution", "3", "--out", tmp_path / "g.csv") == 0
    lines = (tmp_path / "g.csv").read_text().splitlines()
    assert lines[0] == "x1,x2,p_value,member"
    rows = [ln.split(",") for ln in lines[1:]]
    assert len(rows) == 9
    assert all((r[3] == "1") == (float(r[0]) <= 0) for r in rows)


def test_grid_constant_and_bad_resolution(tmp_path):
    poly = write_poly(tmp_path / "c.json", ("x1", "x2"), {(0, 0): -1.0})
    assert run("grid", "--poly", poly, "--resolution", "4", "--box", "0,2", "--out", tmp_path / "c.csv") == 0
    g = read_grid(tmp_path / "c.csv")
    assert g.member.all() and g.points.min() == 0.0 and g.points.max() == 2.0
    assert run("grid", "--poly", poly, "--resolution", "1", "--out", tmp_path / "x.csv") == 2


def test_grid_values_print_17_digits(tmp_path):
    g = evaluate_grid(Polynomial(("x1",), {(1,): 1 / 3}), BoxDomain.unit(1), 2)
    write_grid(g, tmp_path / "g.csv")
    assert "-0.33333333333333331" in (tmp_path / "g.csv").read_text()
    back = read_grid(tmp_path / "g.csv")
    assert np.array_equal(back.values, g.values)


def test_grid_of_problem_value_function(tmp_path):
    assert run("grid", "--problem", PROBLEMS / "bilinear.json", "--resolution", "5", "--out", tmp_path / "t.csv") == 0
    g = read_grid(tmp_path / "t.csv")
    assert np.allclose(g.values, np.abs(g.points[:, 0]))


def test_marching_squares_straight_line():
    axes = [np.linspace(-1, 1, 5), np.linspace(-1, 1, 5)]
    V = np.add.outer(axes[0], 0 * axes[1]) + 0.1
    lines = marching_squares(axes, V)
    assert len(lines) == 1
    assert np.allclose([p[0] for p in lines[0]], -0.1)


def test_marching_squares_closed_circle():
    ax = np.linspace(-1, 1, 41)
    V = 0.5 - np.add.outer(ax ** 2, ax ** 2)
    lines = marching_squares([ax, ax], V)
    assert len(lines) == 1 and lines[0][0] == lines[0][-1]
    r = np.hypot(*np.array(lines[0]).T)
    assert np.allclose(r, np.sqrt(0.5), atol=0.01)


def test_svg_half_plane_and_empty(tmp_path):
    half = evaluate_grid(Polynomial(("x1", "x2"), {(1, 0): 1.0}), BoxDomain.unit(2), 3)
    text = render_svg([half])
    assert text.count("<polyline") == 1 and 'class="member"' in text
    empty = evaluate_grid(Polynomial(("x1", "x2"), {(0, 0): 1.0}), BoxDomain.unit(2), 5)
    text = render_svg([empty])
    assert 'class="member"' not in text and "<polyline" not in text and text.rstrip().endswith("</svg>")
    assert render_svg([half]) == render_svg([half])


def test_svg_command_and_dimension_check(tmp_path):
    p2 = write_poly(tmp_path / "p2.json", ("x1", "x2"), {(1, 0): 1.0})
    p1 = write_poly(tmp_path / "p1.json", ("x1",), {(1,): 1.0})
    run("grid", "--poly", p2, "--resolution", "11", "--out", tmp_path / "a.csv")
    run("grid", "--poly", p1, "--resolution", "11", "--out", tmp_path / "b.csv")
    assert run("svg", "--grid", tmp_path / "a.csv", "--overlay", tmp_path / "a.csv", "--out", tmp_path / "a.svg") == 0
    assert (tmp_path / "a.svg").read_text().count("<g id=") == 2
    assert run("svg", "--grid", tmp_path / "b.csv", "--out", tmp_path / "b.svg") == 2


def test_figure_and_report(tmp_path):
    pytest.importorskip("matplotlib")
    p2 = write_poly(tmp_path / "p2.json", ("x1", "x2"), {(2, 0): 1.0, (0, 2): 1.0, (0, 0): -0.5})
    assert run("grid", "--poly", p2, "--resolution", "21", "--out", tmp_path / "a.csv",
               "--figure", tmp_path / "a.png") == 0
    assert (tmp_path / "a.png").read_bytes()[:4] == b"\x89PNG"
    assert run("figure", "--grid", tmp_path / "a.csv", "--title", "disk", "--out", tmp_path / "f.png") == 0
    assert run("solve", "--problem", PROBLEMS / "pmi_inner.json", "--degrees", "1", "--out", tmp_path / "s") == 0
    assert run("report", "--problem", PROBLEMS / "pmi_inner.json", "--poly", tmp_path / "s.k1.poly.json",
               "--resolution", "40", "--out", tmp_path / "r") == 0
    for suffix in ("target.csv", "s.k1.csv", "svg", "png"):
        assert (tmp_path / f"r.{suffix}").exists()
    target = read_grid(tmp_path / "r.target.csv")
    inner = read_grid(tmp_path / "r.s.k1.csv")
    assert not np.any(inner.member & ~target.member)


def test_grid_fraction_matches_monte_carlo(pmi_spec, pmi_results, tmp_path):
    from quantset import oracle

    p4 = pmi_results[3].p
    g = evaluate_grid(p4, pmi_spec.box, 400, "le0")
    mc = oracle.mc_volume(lambda pts: p4.evaluate_many(pts) <= 0, pmi_spec.box, 100_000, seed=0)
    assert abs(g.member_fraction - mc.estimate) <= 2 * mc.std_error
    # the k = 4 set covers clearly more of the box than the k = 1 set
    g1 = evaluate_grid(pmi_results[0].p, pmi_spec.box, 400, "le0")
    assert g.member_fraction > g1.member_fraction + 0.05
    text = render_svg([g1, g], ["k=1", "k=4"])
    assert text.count("<g id=") == 2
