"""Measure-valued structured population models on metric spaces.

Atomic measures, the exact flat (dual bounded-Lipschitz) distance, two-parameter
flows, and fixed-point solvers for the linear and measure-dependent models.
"""
from .estimators import FlatDistanceTransformer, LinearPopulationSolver, NonlinearPopulationSolver
from .exceptions import (ConfigurationError, ConvergenceError, FlatpopError, InvalidArgumentError,
                         ModelValidationError, UnsupportedBackendError)
from .flat import bielecki_distance, flat_distance, flat_norm, sup_flat_distance
from .linear import SolverConfig, apply_solution_operator, solve_linear
from .measures import AtomicMeasure, MeasurePath, compact, integrate, push_forward
from .model import ModelFunctions, check_model, validate_assumptions
from .nonlinear import solve, solve_nonlinear, stability_experiment
from .spaces import (CircleSpace, DiscreteSpace, EuclideanSpace, GraphSpace, MetricSpace,
                     TrajectorySpace, distance)

__version__ = "0.1.0"

__all__ = [
    "AtomicMeasure", "CircleSpace", "ConfigurationError", "ConvergenceError", "DiscreteSpace",
    "EuclideanSpace", "FlatDistanceTransformer", "FlatpopError", "GraphSpace", "InvalidArgumentError",
    "LinearPopulationSolver", "MeasurePath", "MetricSpace", "ModelFunctions", "ModelValidationError",
    "NonlinearPopulationSolver", "SolverConfig", "TrajectorySpace", "UnsupportedBackendError",
    "apply_solution_operator", "bielecki_distance", "check_model", "compact", "distance",
    "flat_distance", "flat_norm", "integrate", "push_forward", "solve", "solve_linear",
    "solve_nonlinear", "stability_experiment", "sup_flat_distance", "validate_assumptions",
]
