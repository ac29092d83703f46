import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from quantset.poly import Polynomial, PolyMatrix, hessian_quadratic_form, substitute_affine

V = ("x1", "x2")
x1, x2 = (Polynomial.variable(V, v) for v in V)

coefs = st.floats(-5, 5, allow_nan=False, allow_infinity=False)
polys = st.dictionaries(st.tuples(st.integers(0, 3), st.integers(0, 3)), coefs, max_size=6).map(
    lambda d: Polynomial(V, d))
points = st.tuples(st.floats(-2, 2), st.floats(-2, 2))


def test_basic_arithmetic():
    p = (x1 + 1) * (x1 - 1)
    assert p == x1 * x1 - 1
    assert p.degree == 2
    assert (2 * x1 - x1) == x1
    assert (x1 ** 3).coefficient((3, 0)) == 1.0
    assert (1 - x1).coefficient((0, 0)) == 1.0


def test_terms_are_grlex_ordered():
    p = x2 + x1 * x1 + 3 + x1
    assert list(p.terms) == [(0, 0), (1, 0), (0, 1), (2, 0)]


def test_mismatched_variables_rejected():
    q = Polynomial.variable(("x1",), "x1")
    with pytest.raises(ValueError):
        x1 + q
    with pytest.raises(ValueError):
        Polynomial(V, {(1,): 1.0})
    with pytest.raises(ValueError):
        Polynomial(V, {(1, 0): float("nan")})


def test_embed_and_diff():
    p = x1 * x1 * x2
    e = p.embed(("x1", "x2", "y1"))
    assert e.coefficient((2, 1, 0)) == 1.0
    assert p.diff("x1") == 2 * x1 * x2
    assert p.diff("x2").diff("x2").is_zero()


def test_hessian_quadratic_form():
    p = x1 ** 2 + 3 * x1 * x2
    h = hessian_quadratic_form(p)
    assert h.variables == ("x1", "x2", "u1", "u2")
    # 2 u1^2 + 6 u1 u2
    assert h.coefficient((0, 0, 2, 0)) == 2.0
    assert h.coefficient((0, 0, 1, 1)) == 6.0


def test_polymatrix_symmetry_and_eval():
    A = PolyMatrix([[1 - x1, x2], [x2, 1 + x1]])
    vals = A.evaluate_many([[0.5, 0.25]])
    assert np.allclose(vals[0], [[0.5, 0.25], [0.25, 1.5]])
    with pytest.raises(ValueError):
        PolyMatrix([[x1, x2], [x1, x1]])
    assert A == PolyMatrix([[1 - x1, x2], [x2, 1 + x1]])


@given(polys, polys, points)
def test_evaluation_is_a_ring_homomorphism(p, q, pt):
    a, b = p(pt), q(pt)
    scale = 1 + abs(a) + abs(b) + abs(a * b)
    assert abs((p + q)(pt) - (a + b)) <= 1e-9 * scale
    assert abs((p * q)(pt) - a * b) <= 1e-9 * scale


@given(polys)
def test_json_round_trip(p):
    assert Polynomial.from_dict(json.loads(json.dumps(p.to_dict()))) == p


@settings(max_examples=50)
@given(polys, st.floats(0.2, 3), st.floats(-1, 1), points)
def test_substitute_affine_matches_composition(p, s, t, pt):
    q = substitute_affine(p, [s, s], [t, -t])
    direct = p((s * pt[0] + t, s * pt[1] - t))
    assert abs(q(pt) - direct) <= 1e-8 * (1 + abs(direct))


@given(polys)
def test_evaluate_many_matches_pointwise(p):
    pts = np.array([[0.3, -0.7], [1.1, 0.2], [0.0, 0.0]])
    assert np.allclose(p.evaluate_many(pts), [p(r) for r in pts], atol=1e-9)
