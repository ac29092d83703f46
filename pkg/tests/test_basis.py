from math import comb

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from quantset.basis import MomentVector, enumerate_monomials, localizing_matrix, moment_matrix, riesz
from quantset.measures import box_moments
from quantset.poly import Polynomial


@given(st.integers(1, 4), st.integers(0, 5))
def test_monomial_count_and_order(n, d):
    b = enumerate_monomials(n, d)
    assert len(b) == comb(n + d, d)
    degrees = [sum(m) for m in b]
    assert degrees == sorted(degrees)
    assert all(b.position(m) == i for i, m in enumerate(b))


def test_riesz_of_box_moments():
    z = box_moments(2, 4)
    V = ("x1", "x2")
    x1, x2 = (Polynomial.variable(V, v) for v in V)
    # average of x1^2 + x2^4 over [-1,1]^2 = 1/3 + 1/5
    assert riesz(z, x1 * x1 + x2 ** 4) == pytest.approx(1 / 3 + 1 / 5)
    with pytest.raises(ValueError):
        riesz(z, x1 ** 5)


def test_moment_matrix_of_a_measure_is_psd():
    z = box_moments(2, 6)
    M = moment_matrix(z, 3)
    assert np.allclose(M, M.T)
    assert np.linalg.eigvalsh(M)[0] > 0


def test_localizing_matrix_of_a_support_constraint_is_psd():
    z = box_moments(2, 6)
    V = ("x1", "x2")
    theta = 1 - Polynomial.variable(V, "x1") ** 2
    L = localizing_matrix(z, theta, 2)
    assert np.linalg.eigvalsh(L)[0] > -1e-12
    # a polynomial negative on most of the box gives an indefinite localizer
    bad = Polynomial.variable(V, "x1") ** 2 - 0.9
    assert np.linalg.eigvalsh(localizing_matrix(z, bad, 2))[0] < 0


def test_localizing_degree_check():
    z = box_moments(1, 4)
    with pytest.raises(ValueError):
        localizing_matrix(z, None, 3)


def test_moment_vector_shape_validated():
    with pytest.raises(ValueError):
        MomentVector(enumerate_monomials(1, 2), np.zeros(2))
