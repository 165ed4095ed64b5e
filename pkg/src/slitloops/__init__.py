"""Looped-path corrections to multi-slit interference and the Sorkin parameter."""

from ._kernels import BACKEND
from .errorbudget import ErrorBudget, MaterialDefaults, error_budget
from .errors import (
    BudgetError,
    ConfigError,
    ConvergenceError,
    DegenerateNormalizationError,
    DomainError,
    GeometryError,
    SlitLoopsError,
)
from .experiment import (
    BeamParameters,
    ExperimentSetup,
    Particle,
    SlitGeometry,
    ValidatedSetup,
    load_setup,
    preset,
    validate,
)
from .kernels import KernelEvaluator, OrderedSlitPair, SlitSubset, k1, k2_pair, k2_pair_direct, k_total
from .quadrature import QuadratureSpec
from .sorkin import SorkinScan, delta, epsilon_full, epsilon_linear, kappa_scan, two_slit_loop_deviation

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "BeamParameters",
    "BudgetError",
    "ConfigError",
    "ConvergenceError",
    "DegenerateNormalizationError",
    "DomainError",
    "ErrorBudget",
    "ExperimentSetup",
    "GeometryError",
    "KernelEvaluator",
    "MaterialDefaults",
    "OrderedSlitPair",
    "Particle",
    "QuadratureSpec",
    "SlitGeometry",
    "SlitLoopsError",
    "SlitSubset",
    "SorkinScan",
    "ValidatedSetup",
    "delta",
    "epsilon_full",
    "epsilon_linear",
    "error_budget",
    "k1",
    "k2_pair",
    "k2_pair_direct",
    "k_total",
    "kappa_scan",
    "load_setup",
    "preset",
    "two_slit_loop_deviation",
    "validate",
]
