"""Model parameters, admissibility and closed-form constants.

All functions here are pure and operate on immutable values.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Mapping, Sequence

import numpy as np
from scipy import special

from .errors import AdmissibilityError, DomainError, RangeError

__all__ = [
    "ModelParams",
    "RieszKernel",
    "RateConstants",
    "validate_params",
    "riesz_constant",
    "sphere_area",
    "ldp_rate_constant",
    "km_transfer",
    "scaling_exponent",
]


@dataclass(frozen=True)
class ModelParams:
    """Parameters of the additive stable field and its Riesz functional.

    Parameters
    ----------
    beta : float
        Stability index in (0, 2].
    d : int
        Spatial dimension.
    p : int
        Number of independent processes.
    sigma : float
        Riesz exponent, admissible when ``0 < sigma < min(p*beta, d)``.
    z : tuple of float
        Shift point, defaults to the origin.

    Use :func:`validate_params` to construct checked instances.
    """

    beta: float
    d: int
    p: int
    sigma: float
    z: tuple = field(default=())

    def __post_init__(self):
        if len(self.z) == 0:
            object.__setattr__(self, "z", (0.0,) * int(self.d))

    @property
    def z_array(self) -> np.ndarray:
        return np.asarray(self.z, dtype=float)

    def to_record(self) -> dict:
        """Flat key-value form used by configs and persisted outputs."""
        return {
            "beta": float(self.beta),
            "d": int(self.d),
            "p": int(self.p),
            "sigma": float(self.sigma),
            "z": [float(v) for v in self.z],
        }

    @classmethod
    def from_record(cls, rec: Mapping[str, Any]) -> "ModelParams":
        return validate_params(
            rec["beta"], rec["d"], rec["p"], rec["sigma"], rec.get("z")
        )

    def with_sigma(self, sigma: float) -> "ModelParams":
        return validate_params(self.beta, self.d, self.p, sigma, self.z)


def _as_int(name: str, value) -> int:
    if isinstance(value, bool):
        raise RangeError(f"{name} must be a positive integer, got {value!r}")
    try:
        iv = int(value)
    except (TypeError, ValueError):
        raise RangeError(f"{name} must be a positive integer, got {value!r}")
    if iv != value:
        raise RangeError(f"{name} must be a positive integer, got {value!r}")
    if iv < 1:
        raise RangeError(f"{name} must be >= 1, got {value!r}")
    return iv


def _as_real(name: str, value) -> float:
    if isinstance(value, bool):
        raise RangeError(f"{name} must be a real number, got {value!r}")
    try:
        fv = float(value)
    except (TypeError, ValueError):
        raise RangeError(f"{name} must be a real number, got {value!r}")
    if not math.isfinite(fv):
        raise RangeError(f"{name} must be finite, got {value!r}")
    return fv


def validate_params(beta, d, p, sigma, z: Sequence[float] | None = None) -> ModelParams:
    """Check a candidate parameter tuple and build :class:`ModelParams`.

    Raises
    ------
    RangeError
        If ``beta`` is outside (0, 2] or ``d``, ``p`` are not positive integers.
    AdmissibilityError
        If ``sigma`` is outside (0, min(p*beta, d)).
    """
    beta = _as_real("beta", beta)
    if not 0.0 < beta <= 2.0:
        raise RangeError(f"beta must lie in (0, 2], got {beta}")
    d = _as_int("d", d)
    p = _as_int("p", p)
    sigma = _as_real("sigma", sigma)
    if sigma <= 0.0:
        raise AdmissibilityError(f"sigma must be > 0, got {sigma}")
    bound = min(p * beta, d)
    if sigma >= bound:
        raise AdmissibilityError(
            f"sigma must be < min(p*beta, d) = {bound}, got {sigma}"
        )
    if z is None or len(z) == 0:
        zt = (0.0,) * d
    else:
        zt = tuple(_as_real("z", v) for v in np.ravel(z))
        if len(zt) != d:
            raise RangeError(f"z must have {d} components, got {len(zt)}")
    return ModelParams(beta=beta, d=d, p=p, sigma=sigma, z=zt)


def riesz_constant(d: int, sigma: float) -> float:
    """Constant making ``|x|^-sigma`` and ``C |lam|^-(d-sigma)`` a Fourier pair.

    ``C = pi^(-d/2) 2^(-sigma) Gamma((d-sigma)/2) / Gamma(sigma/2)``.
    """
    if not 0.0 < sigma < d:
        raise DomainError(f"sigma must lie in (0, d={d}), got {sigma}")
    lg = special.gammaln((d - sigma) / 2.0) - special.gammaln(sigma / 2.0)
    return float(math.exp(lg - 0.5 * d * math.log(math.pi) - sigma * math.log(2.0)))


def sphere_area(d: int) -> float:
    """Surface area of the unit sphere in R^d."""
    return float(2.0 * math.pi ** (d / 2.0) / math.gamma(d / 2.0))


@dataclass(frozen=True)
class RieszKernel:
    """Fourier-side kernel ``phi(lam) = C |lam|^-(d-sigma)``."""

    sigma: float
    d: int
    c_d_sigma: float

    @classmethod
    def build(cls, d: int, sigma: float) -> "RieszKernel":
        return cls(sigma=float(sigma), d=int(d), c_d_sigma=riesz_constant(d, sigma))

    def __call__(self, lam) -> np.ndarray:
        r = np.asarray(lam, dtype=float)
        if r.ndim >= 1 and r.shape[-1] == self.d and self.d > 1:
            r = np.linalg.norm(r, axis=-1)
        r = np.abs(r)
        return self.c_d_sigma * r ** (-(self.d - self.sigma))


@dataclass(frozen=True)
class RateConstants:
    """Closed-form constants derived from the parameters and rho."""

    ldp_rate: float
    moment_growth_log: float
    lil_constant: float
    scaling_exponent: float
    rho: float

    def to_record(self) -> dict:
        return {k: float(getattr(self, k)) for k in self.__dataclass_fields__}


def ldp_rate_constant(params: ModelParams, rho: float) -> RateConstants:
    """Tail, moment-growth and LIL constants for a given ``rho > 0``."""
    rho = float(rho)
    if not (rho > 0.0 and math.isfinite(rho)):
        raise DomainError(f"rho must be positive and finite, got {rho}")
    b, p, s = params.beta, params.p, params.sigma
    pb = p * b
    frac = (pb - s) / pb
    ldp = (s / b) * frac ** ((pb - s) / s) * rho ** (-b / s)
    growth = ((pb - s) / b) * math.log(pb / (pb - s)) + math.log(rho)
    lil = (s / b) ** (-s / b) * frac ** ((s - pb) / b) * rho
    return RateConstants(
        ldp_rate=ldp,
        moment_growth_log=growth,
        lil_constant=lil,
        scaling_exponent=(pb - s) / b,
        rho=rho,
    )


def km_transfer(theta: float, kappa: float) -> float:
    """Tail exponent predicted from factorial-normalized moment growth.

    If ``(1/n) log(E Y^n / (n!)^theta) -> kappa`` then
    ``t^(-1/theta) log P(Y >= t) -> -theta * exp(-kappa/theta)``.
    ``kappa`` is the growth limit itself (not its negative).
    """
    theta = float(theta)
    if not theta > 0.0:
        raise DomainError(f"theta must be > 0, got {theta}")
    return -theta * math.exp(-float(kappa) / theta)


def scaling_exponent(params: ModelParams) -> tuple[float, float]:
    """Time and space exponents of the scaling law.

    ``zeta^z([0,t]^p)`` equals in law ``t^a zeta^(z/t^b)([0,1]^p)`` with
    ``a = (p*beta - sigma)/beta`` and ``b = 1/beta``.
    """
    b = params.beta
    return ((params.p * b - params.sigma) / b, 1.0 / b)
