"""Polynomial inner/outer approximations of quantified semi-algebraic sets.

A problem fixes a box B of parameters x, a set K of (x, y) and an objective
f; the hierarchy computes polynomials p_k of degree 2k with p_k >= f on K
whose sublevel (inner) or superlevel (outer) sets approximate
{x : f(x, y) <= 0 for all y in K_x} resp. {x : f(x, y) >= 0 for some y}.
"""
from .engine import (
    ApproximationResult,
    CompositionResult,
    IntersectionResult,
    LiftedProblem,
    TwoQuantifierSpec,
    approximate,
    approximate_inner,
    approximate_intersection,
    approximate_outer,
    compose_exists_forall,
    compose_forall_exists,
    lift_min,
    pmi_to_scalar,
)
from .poly import Polynomial, PolyMatrix
from .problem import BoxDomain, Constraint, Objective, ProblemSpec, make_spec
from .problemfile import load_problem, write_problem

__version__ = "0.1.0"
