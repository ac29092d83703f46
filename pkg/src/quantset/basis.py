"""Monomial bases, the Riesz functional and moment / localizing matrices."""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from itertools import combinations_with_replacement
from math import comb

import numpy as np

from .poly import Polynomial, grlex_key


@lru_cache(maxsize=None)
def _monomials(n_vars: int, max_degree: int) -> tuple:
    out = []
    for d in range(max_degree + 1):
        block = []
        for combo in combinations_with_replacement(range(n_vars), d):
            e = [0] * n_vars
            for i in combo:
                e[i] += 1
            block.append(tuple(e))
        block.sort(key=grlex_key)
        out.extend(block)
    return tuple(out)


@dataclass(frozen=True)
class MonomialBasis:
    n_vars: int
    max_degree: int
    monomials: tuple = field(repr=False)
    index: dict = field(repr=False, compare=False)

    def __len__(self):
        return len(self.monomials)

    def __iter__(self):
        return iter(self.monomials)

    def __getitem__(self, i):
        return self.monomials[i]

    def position(self, exps) -> int:
        try:
            return self.index[tuple(exps)]
        except KeyError:
            raise KeyError(f"monomial {tuple(exps)} is outside the degree-{self.max_degree} basis") from None

    def __contains__(self, exps):
        return tuple(exps) in self.index


@lru_cache(maxsize=None)
def enumerate_monomials(n_vars: int, max_degree: int) -> MonomialBasis:
    """All monomials of total degree <= max_degree in graded-lex order.

    >>> [m for m in enumerate_monomials(2, 1)]
    [(0, 0), (1, 0), (0, 1)]
    """
    if n_vars < 0 or max_degree < 0:
        raise ValueError("n_vars and max_degree must be nonnegative")
    monos = _monomials(n_vars, max_degree)
    assert len(monos) == comb(n_vars + max_degree, max_degree)
    return MonomialBasis(n_vars, max_degree, monos, {m: i for i, m in enumerate(monos)})


@dataclass(frozen=True)
class MomentVector:
    """A truncated (pseudo-)moment sequence indexed by a monomial basis."""

    basis: MonomialBasis
    values: np.ndarray

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        if vals.shape != (len(self.basis),):
            raise ValueError(f"expected {len(self.basis)} moment values, got {vals.shape}")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    def __getitem__(self, exps) -> float:
        return float(self.values[self.basis.position(exps)])

    @classmethod
    def from_function(cls, basis: MonomialBasis, fn) -> "MomentVector":
        return cls(basis, np.array([fn(m) for m in basis]))


def riesz(z: MomentVector, p: Polynomial) -> float:
    """L_z(p) = sum_a p_a z_a."""
    if p.n_vars != z.basis.n_vars:
        raise ValueError(f"polynomial has {p.n_vars} variables, moments have {z.basis.n_vars}")
    total = 0.0
    for exps, c in p.items():
        if exps not in z.basis:
            raise ValueError(f"monomial {exps} of degree {sum(exps)} is not covered by the moments")
        total += c * z.values[z.basis.index[exps]]
    return total


def localizing_matrix(z: MomentVector, g: Polynomial | None, d: int) -> np.ndarray:
    """Matrix with entry (a, b) = sum_c g_c z_{a+b+c} over the degree-d basis."""
    n = z.basis.n_vars
    if g is None:
        g = Polynomial.constant([f"v{i}" for i in range(n)], 1.0)
    if g.n_vars != n:
        raise ValueError(f"localizer has {g.n_vars} variables, moments have {n}")
    need = 2 * d + max(g.degree, 0)
    if need > z.basis.max_degree:
        raise ValueError(f"moments of degree {z.basis.max_degree} cannot fill a matrix needing degree {need}")
    rows = enumerate_monomials(n, d)
    size = len(rows)
    out = np.zeros((size, size))
    vals = z.values
    index = z.basis.index
    gterms = list(g.items())
    for a in range(size):
        ra = rows[a]
        for b in range(a, size):
            rb = rows[b]
            s = 0.0
            for gc, coef in gterms:
                s += coef * vals[index[tuple(x + y + w for x, y, w in zip(ra, rb, gc))]]
            out[a, b] = s
            out[b, a] = s
    return out


def moment_matrix(z: MomentVector, d: int) -> np.ndarray:
    """M_d(z) with entry (a, b) = z_{a+b}."""
    return localizing_matrix(z, None, d)
