import numpy as np
import pytest

from quantset.measures import box_moment, box_moments, rescale_problem
from quantset.oracle import quadrature_moment_check
from quantset.poly import Polynomial
from quantset.problem import BoxDomain, make_spec


def test_closed_form_moments():
    assert box_moment((0, 0)) == 1.0
    assert box_moment((1, 2)) == 0.0
    assert box_moment((2, 4)) == pytest.approx(1 / 15)


@pytest.mark.parametrize("n", [1, 2, 3])
def test_moments_match_quadrature(n):
    assert quadrature_moment_check(n, 10) <= 1e-13


def test_moments_match_monte_carlo():
    rng = np.random.default_rng(0)
    pts = rng.uniform(-1, 1, size=(200_000, 2))
    z = box_moments(2, 4)
    for mono, val in zip(z.basis, z.values):
        est = np.mean(np.prod(pts ** np.array(mono), axis=1))
        assert abs(est - val) < 5e-3


def test_rescale_round_trip():
    V = ("x1", "y1")
    x = Polynomial.variable(V, "x1")
    y = Polynomial.variable(V, "y1")
    spec = make_spec(1, 1, x * y, [4 - y * y], box=BoxDomain((1.0,), (3.0,)), y_bound=4.0)
    sp = rescale_problem(spec)
    # scaled f at (x', y') equals original f at (x' + 2, 2 y')
    assert sp.f((0.5, 0.5)) == pytest.approx(2.5 * 1.0)
    p = Polynomial(("x1",), {(2,): 1.0, (1,): -1.0})
    back = sp.to_original(sp.to_scaled(p))
    assert all(abs(c) < 1e-12 for _, c in (back - p).items())
    # the ball constraint is appended after the user constraints
    assert len(sp.generators) == 2 and len(sp.thetas) == 1


def test_rescale_warns_on_small_y_bound():
    V = ("x1", "y1")
    y = Polynomial.variable(V, "y1")
    spec = make_spec(1, 1, y, [4 - y * y], y_bound=1.0)
    with pytest.warns(UserWarning, match="y_bound"):
        rescale_problem(spec)


def test_rescale_requires_scalar_objective():
    from quantset.engine import example_pmi_spec

    with pytest.raises(ValueError):
        rescale_problem(example_pmi_spec())
