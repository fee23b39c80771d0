"""Numerical tools for semilinear Tricomi-type wave equations with time-dependent damping and mass."""

__version__ = "0.1.0"

from .errors import DomainError, NumericalFailure, TruncationError
from .exponents import ModelParams, strauss_exponent, fujita_exponent, delta_of

__all__ = [
    "DomainError",
    "NumericalFailure",
    "TruncationError",
    "ModelParams",
    "strauss_exponent",
    "fujita_exponent",
    "delta_of",
]
