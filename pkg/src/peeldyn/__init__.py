"""Semi-analytical solver for the damped dynamic peel-test model."""

from .errors import (ConvergenceError, DomainError, NonExistenceError, PeelError,
                     StructuralError, ValidationError)
from .geometry import CharMaps, DomainTag, Front, Region, classify, eval_maps, lambda_eval, region
from .kernels import BACKEND as KERNEL_BACKEND

__version__ = "0.1.0"

__all__ = [
    "CharMaps", "ConvergenceError", "DomainError", "DomainTag", "Front", "KERNEL_BACKEND",
    "NonExistenceError", "PeelError", "Region", "StructuralError", "ValidationError",
    "classify", "eval_maps", "lambda_eval", "region",
]
