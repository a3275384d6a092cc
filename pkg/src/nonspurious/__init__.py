"""Variational solver and verification harness for discrete Dirichlet problems

    Δ²x(k-1) = f(k/n, x(k)) / n²,  x(0) = x(n) = 0.
"""
from .expr import diff_x, evaluate, parse, to_string
from .grid import GridFunction, delta, delta2, max_norm, norm_0, norm_E
from .nonlinearity import Nonlinearity, build, from_catalogue
from .solver import DiscreteBVP, NewtonConfig, SolveReport, linear_bvp_solve, newton_solve

__all__ = [
    "DiscreteBVP",
    "GridFunction",
    "NewtonConfig",
    "Nonlinearity",
    "SolveReport",
    "build",
    "delta",
    "delta2",
    "diff_x",
    "evaluate",
    "from_catalogue",
    "linear_bvp_solve",
    "max_norm",
    "newton_solve",
    "norm_0",
    "norm_E",
    "parse",
    "to_string",
]
