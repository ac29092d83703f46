import warnings

import pytest

from quantset import engine
from quantset.poly import Polynomial
from quantset.problem import Objective, make_spec

ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)


@pytest.fixture
def report_line():
    """Record (and print) one 'criterion N: PASS|FAIL ...' line."""

    def record(number, passed, detail):
        line = f"criterion {number}: {'PASS' if passed else 'FAIL'} - {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)
        return passed

    return record


XY = ("x1", "y1")
X = Polynomial.variable(XY, "x1")
Y = Polynomial.variable(XY, "y1")


def interval_spec(f, mode="inner", **kw):
    """x in [-1, 1], y with 1 - y^2 >= 0."""
    return make_spec(1, 1, f, [1 - Y * Y], mode=mode, **kw)


def solve(spec, orders, **opts):
    opts.setdefault("check_assumptions", False)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return engine.approximate(spec, orders, **opts)


@pytest.fixture(scope="session")
def pmi_spec():
    return engine.example_pmi_spec("inner")


@pytest.fixture(scope="session")
def pmi_results(pmi_spec):
    return solve(pmi_spec, [1, 2, 3, 4])


@pytest.fixture(scope="session")
def pmi_monotone(pmi_spec):
    return solve(pmi_spec, [1, 2, 3, 4], monotone=True)


@pytest.fixture(scope="session")
def pmi_convex(pmi_spec):
    return solve(pmi_spec, [3], convex=True)[0]


@pytest.fixture(scope="session")
def pmi_outer():
    spec = engine.example_pmi_spec("outer")
    return spec, solve(spec, [1, 2])


@pytest.fixture(scope="session")
def linear_x():
    spec = interval_spec(X)
    return spec, solve(spec, [1, 2, 3, 4])


@pytest.fixture(scope="session")
def linear_y():
    spec = interval_spec(Y, mode="outer")
    return spec, solve(spec, [1])


@pytest.fixture(scope="session")
def bilinear():
    spec = interval_spec(X * Y)
    return spec, solve(spec, [1, 2, 3])


@pytest.fixture(scope="session")
def bilinear_union():
    spec = make_spec(1, 1, X * Y, [], union_pieces=[[Y, 1 - Y], [-Y, 1 + Y]])
    return spec, solve(spec, [3])


@pytest.fixture(scope="session")
def min_of_instance():
    spec = interval_spec(Objective("min_of", pieces=(X - Y, Y - X * X - 0.5)))
    return spec, solve(spec, [1, 2])


@pytest.fixture(scope="session")
def outer_shifted():
    # value function |x| - 1/2: the outer set is {|x| >= 1/2}
    spec = interval_spec(X * Y - 0.5, mode="outer")
    return spec, solve(spec, [1, 2, 3])


@pytest.fixture(scope="session")
def solved_instances(pmi_spec, pmi_results, pmi_monotone, pmi_convex, pmi_outer, linear_x, linear_y, bilinear,
                     bilinear_union, min_of_instance, outer_shifted):
    """(name, spec, result) for every optimal solve made by the shared fixtures."""
    out = [(f"pmi k={r.k}", pmi_spec, r) for r in pmi_results]
    out += [(f"pmi monotone k={r.k}", pmi_spec, r) for r in pmi_monotone]
    out.append(("pmi convex k=3", pmi_spec, pmi_convex))
    for name, (spec, results) in [("pmi outer", pmi_outer), ("f=x", linear_x), ("f=y outer", linear_y),
                                  ("f=xy", bilinear), ("f=xy union", bilinear_union),
                                  ("min_of", min_of_instance), ("xy-1/2 outer", outer_shifted)]:
        out += [(f"{name} k={r.k}", spec, r) for r in results]
    assert all(r.optimal for _, _, r in out), [(n, r.status) for n, _, r in out if not r.optimal]
    return out
