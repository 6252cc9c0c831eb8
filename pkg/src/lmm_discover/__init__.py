"""Linear multistep methods repurposed for dynamics discovery."""

__version__ = "0.1.0"

from .analysis import (
    Direction,
    StabilityClass,
    StabilityTag,
    classify_stability,
    companion_matrix,
    consistency_report,
    power_norm_profile,
    reduced_second_char_poly,
)
from .discovery import DiscoveryProblem, DiscoveryResult, error_vs_truth, solve_discovery
from .experiments import (
    ConvergenceConfig,
    LongTimeConfig,
    estimate_order,
    run_convergence,
    run_longtime,
)
from .polynomials import CharPoly, poly_roots
from .reference import GridFunction, cubic_2d, integrate_reference
from .schemes import Family, Scheme, ab_scheme, am_scheme, bdf_scheme, catalogue, make_scheme

__all__ = [
    "CharPoly",
    "ConvergenceConfig",
    "Direction",
    "DiscoveryProblem",
    "DiscoveryResult",
    "Family",
    "GridFunction",
    "LongTimeConfig",
    "Scheme",
    "StabilityClass",
    "StabilityTag",
    "ab_scheme",
    "am_scheme",
    "bdf_scheme",
    "catalogue",
    "classify_stability",
    "companion_matrix",
    "consistency_report",
    "cubic_2d",
    "error_vs_truth",
    "estimate_order",
    "integrate_reference",
    "make_scheme",
    "poly_roots",
    "power_norm_profile",
    "reduced_second_char_poly",
    "run_convergence",
    "run_longtime",
    "solve_discovery",
]
