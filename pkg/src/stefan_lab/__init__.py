"""Numerical laboratory for a ratio-dependent predator-prey model with a Stefan free boundary."""

__version__ = "0.1.0"

from .errors import ConfigError, DomainError, NumericalError, PreconditionError, StefanLabError
from .model import (
    BoundQuadruple,
    CoexistenceState,
    InitialData,
    ModelParams,
    Thresholds,
    UpperSolution,
    bound_quadruple,
    coexistence_state,
    reaction_u,
    reaction_v,
    thresholds,
    upper_solution_construct,
)
from .solver import GridSpec, SolutionState, Trajectory, boundary_gradient, run, step

__all__ = [
    "BoundQuadruple", "CoexistenceState", "ConfigError", "DomainError", "GridSpec",
    "InitialData", "ModelParams", "NumericalError", "PreconditionError", "SolutionState",
    "StefanLabError", "Thresholds", "Trajectory", "UpperSolution", "boundary_gradient",
    "bound_quadruple", "coexistence_state", "reaction_u", "reaction_v", "run", "step",
    "thresholds", "upper_solution_construct",
]
