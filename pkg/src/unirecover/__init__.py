"""Universal sampling recovery of multivariate periodic functions in the uniform norm."""

from unirecover.config import Settings, get_settings
from unirecover.cubature import exactness_check, lattice_certificate, max_exact_cross
from unirecover.discretization import certify_collection, estimate_discretization_constant
from unirecover.errors import (
    CapExceededError,
    ConfigError,
    DimensionMismatchError,
    MissingCertificateError,
    NonFiniteInputError,
    UnirecoverError,
)
from unirecover.function_classes import SmoothnessVector, make_test_function, parse_function_spec
from unirecover.lattices import PointSet, fibonacci_lattice, korobov_lattice, korobov_search
from unirecover.recovery import (
    EvaluationGrid,
    chebyshev_fit,
    lebesgue_vs,
    universal_cheb_recover,
    universal_vp_recover,
    vs_apply,
)
from unirecover.torus import ShapeVector, TorusPoint, enumerate_hyperbolic_cross, enumerate_shapes

__all__ = [
    "CapExceededError",
    "ConfigError",
    "DimensionMismatchError",
    "EvaluationGrid",
    "MissingCertificateError",
    "NonFiniteInputError",
    "PointSet",
    "Settings",
    "ShapeVector",
    "SmoothnessVector",
    "TorusPoint",
    "UnirecoverError",
    "certify_collection",
    "chebyshev_fit",
    "enumerate_hyperbolic_cross",
    "enumerate_shapes",
    "estimate_discretization_constant",
    "exactness_check",
    "fibonacci_lattice",
    "get_settings",
    "korobov_lattice",
    "korobov_search",
    "lattice_certificate",
    "lebesgue_vs",
    "make_test_function",
    "max_exact_cross",
    "parse_function_spec",
    "universal_cheb_recover",
    "universal_vp_recover",
    "vs_apply",
]
