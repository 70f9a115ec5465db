"""Numerical laboratory for Riesz potentials of additive stable fields."""
from .params import (ModelParams, RateConstants, RieszKernel, km_transfer,
                     ldp_rate_constant, riesz_constant, scaling_exponent,
                     validate_params)

__all__ = ["ModelParams", "RateConstants", "RieszKernel", "km_transfer", "ldp_rate_constant",
           "riesz_constant", "scaling_exponent", "validate_params"]

__version__ = "0.1.0"
