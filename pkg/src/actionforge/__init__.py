"""Periodic solutions of u'' = -grad F(t, u) from a spectral discretization of the action."""

__version__ = "0.1.0"

from .action import ActionFunctional, action_gradient, action_value
from .config import ConfigError, build_potential, load_config, validate_config
from .expr import ExprDomainError, ExprError, ExprSyntaxError, parse
from .potential import (
    ExpressionPotential,
    ForcedPendulum,
    ForcedPotential,
    Forcing,
    FunctionPotential,
    LinearOscillator,
    Pendulum,
    PotentialModel,
    SampleGrid,
    SoftWell,
)
from .solvers import SolveConfig, SolveResult, check_saddle_geometry, minimize_direct, saddle_search
from .trajectory import FourierTrajectory, Lattice, from_samples
from .verify import ode_residual, property_suite, shooting_oracle, verify_solution

__all__ = [
    "ActionFunctional", "ConfigError", "ExprDomainError", "ExprError", "ExprSyntaxError",
    "ExpressionPotential", "ForcedPendulum", "ForcedPotential", "Forcing", "FourierTrajectory",
    "FunctionPotential", "Lattice", "LinearOscillator", "Pendulum", "PotentialModel", "SampleGrid",
    "SoftWell", "SolveConfig", "SolveResult", "action_gradient", "action_value", "build_potential",
    "check_saddle_geometry", "from_samples", "load_config", "minimize_direct", "ode_residual", "parse",
    "property_suite", "saddle_search", "shooting_oracle", "validate_config", "verify_solution",
]
