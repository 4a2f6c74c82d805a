"""Radial numerical laboratory for the focusing inhomogeneous NLS with an
inverse-square potential in three dimensions."""
from .errors import (AnalysisError, ConfigError, DescentFailure, GridError, InlsError,
                     NumericalBreakdown, ParameterError)
from .grid import RadialGrid, RadialState, profile
from .params import ModelParams, validate_params
from .solver import SimConfig, Trajectory, evolve

__all__ = [
    "AnalysisError", "ConfigError", "DescentFailure", "GridError", "InlsError",
    "NumericalBreakdown", "ParameterError", "RadialGrid", "RadialState", "profile",
    "ModelParams", "validate_params", "SimConfig", "Trajectory", "evolve",
]
__version__ = "0.1.0"
