"""
biodelay Core Package

Model, stability, region, simulation and fitting routines.
"""

from .errors import BioDelayError
from .model import (
    EquilibriumPoint,
    LinearizedModel,
    ModelParams,
    linearize,
    solve_equilibrium_closed_loop,
    solve_equilibrium_open_loop,
)
from .quasipoly import QuasiPolynomial, closed_loop_quasipolynomial, open_loop_quasipolynomial

__all__ = [
    "BioDelayError",
    "EquilibriumPoint",
    "LinearizedModel",
    "ModelParams",
    "QuasiPolynomial",
    "closed_loop_quasipolynomial",
    "linearize",
    "open_loop_quasipolynomial",
    "solve_equilibrium_closed_loop",
    "solve_equilibrium_open_loop",
]
