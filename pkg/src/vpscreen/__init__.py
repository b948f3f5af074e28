"""Stationary Vlasov-Poisson solutions with Debye screening.

Solutions of ``-Delta Q = g(Q) - 1 + mu`` built by a fixed-point method, with
the phase-space density ``f = F(|v|^2/2 + Q)`` reconstructed on demand.
"""
from .errors import (
    ConsistencyError,
    ConvergenceError,
    ParameterError,
    QuadratureError,
    TableRangeError,
    VPScreenError,
)
from .grids import Grid, RadialMesh
from .gtransform import GTransform, build_gtransform, verify_conditions
from .nonuniqueness import ComparisonReport, charge_neutrality, compare, f_difference_lower_bound, negative_set
from .profile import calibrate_c_beta, extend, make_maxwellian, validate_profile
from .reconstruct import PhaseSpaceSampler
from .scenario import Scenario
from .solver import Solution, SolverConfig, radial_solve, solve
from .sources import ChargeMeasure, build_S, point_charge

__version__ = "0.1.0"

__all__ = [
    "ChargeMeasure",
    "ComparisonReport",
    "ConsistencyError",
    "ConvergenceError",
    "GTransform",
    "Grid",
    "ParameterError",
    "PhaseSpaceSampler",
    "QuadratureError",
    "RadialMesh",
    "Scenario",
    "Solution",
    "SolverConfig",
    "TableRangeError",
    "VPScreenError",
    "build_S",
    "build_gtransform",
    "calibrate_c_beta",
    "charge_neutrality",
    "compare",
    "extend",
    "f_difference_lower_bound",
    "make_maxwellian",
    "negative_set",
    "point_charge",
    "radial_solve",
    "solve",
    "validate_profile",
]
