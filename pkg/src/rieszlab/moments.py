"""Moments of the functional over exponential time boxes.

Two independent routes are provided:

* path Monte Carlo (:func:`moment_path_mc`): sample exponential horizons
  and paths, evaluate the functional, average its powers;
* Fourier Monte Carlo (:func:`moment_fourier`): importance sampling of the
  exact frequency representation

  ``E zeta^z(tau box)^m = int e^{i sum lam_k . z} [S(lam)]^p prod phi(lam_k) dlam``

  with ``S`` the permutation sum of ``Q(lam) = 1 / (1 + |lam|^beta)`` over
  prefix sums and ``phi`` the Fourier-side Riesz kernel.
"""
from __future__ import annotations

import itertools
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Dict, Optional, Sequence

import numpy as np
from scipy import special

from .errors import DomainError, NonIntegrable, OrderTooLarge
from .evaluator import (EPS_RATIOS, extrapolation_weights, field_points,
                        kernel_sums, step_scale, BoxSpec)
from .params import ModelParams, riesz_constant, sphere_area
from .rng import make_rng
from .sampler import TimeGrid, sample_exponential_horizon, sample_path_bundle

__all__ = [
    "MAX_ORDER",
    "FrequencyConfig",
    "MomentEstimate",
    "permutation_sum",
    "first_moment_closed_form",
    "rough_upper_bound",
    "moment_fourier",
    "moment_path_mc",
    "moment_path_mc_orders",
    "unit_cube_moment_bounds",
    "fixed_time_bound",
    "moment_growth_sequence",
]

MAX_ORDER = 8
STREAM_PATH_MC = 11
STREAM_FOURIER = 12
FOURIER_CHUNK = 1 << 15


@dataclass(frozen=True)
class MomentEstimate:
    """Estimate of ``E[zeta^m]`` with its standard error."""

    m: int
    value: float
    std_error: float
    method: str
    params: ModelParams
    z: tuple
    n_samples: int = 0
    seed: Optional[int] = None
    diagnostics: dict = field(default_factory=dict, compare=False)

    def to_row(self) -> dict:
        return {
            "method": self.method,
            "m": self.m,
            "beta": self.params.beta,
            "d": self.params.d,
            "p": self.params.p,
            "sigma": self.params.sigma,
            "z": " ".join(repr(float(v)) for v in self.z),
            "value": self.value,
            "std_error": self.std_error,
            "N": self.n_samples,
            "seed": self.seed,
        }


def _check_order(m: int) -> int:
    if int(m) != m or m < 1:
        raise DomainError(f"moment order must be a positive integer, got {m}")
    if m > MAX_ORDER:
        raise OrderTooLarge(f"order {m} exceeds the limit {MAX_ORDER}")
    return int(m)


def _q_default(beta: float) -> Callable:
    def q(lam):
        return 1.0 / (1.0 + np.linalg.norm(lam, axis=-1) ** beta)
    return q


def permutation_sum(q, lambdas, params: ModelParams) -> np.ndarray:
    """Sum over permutations of products of ``q`` at prefix sums.

    Parameters
    ----------
    q : callable or None
        Maps an array ``(..., d)`` to values ``(...)``. None selects
        ``1 / (1 + |lam|^beta)``.
    lambdas : array_like, shape (m, d) or (N, m, d)
    params : ModelParams

    Returns
    -------
    float or ndarray (N,)
    """
    lam = np.asarray(lambdas, dtype=float)
    single = lam.ndim == 2
    if single:
        lam = lam[None]
    m = _check_order(lam.shape[1])
    if q is None:
        q = _q_default(params.beta)
    total = np.zeros(lam.shape[0])
    for perm in itertools.permutations(range(m)):
        cs = np.cumsum(lam[:, list(perm)], axis=1)
        total += np.prod(q(cs), axis=1)
    return float(total[0]) if single else total


def first_moment_closed_form(params: ModelParams) -> float:
    """``int phi Q^p = C omega (1/beta) B(sigma/beta, p - sigma/beta)``."""
    b, s, p, d = params.beta, params.sigma, params.p, params.d
    lb = special.betaln(s / b, p - s / b)
    return riesz_constant(d, s) * sphere_area(d) / b * math.exp(lb)


def rough_upper_bound(params: ModelParams, n: int) -> float:
    """``(n!)^p`` times the ``n``-th power of the first moment."""
    return math.factorial(int(n)) ** params.p * first_moment_closed_form(params) ** int(n)


def unit_cube_moment_bounds(params: ModelParams, n: int, unit_moment: float):
    """Bounds on the exponential-box moment from the unit-cube moment.

    Returns ``(lower, upper)`` with
    ``lower = p^(-n(p beta - sigma)/beta - 1) Gamma(1 + n(p beta - sigma)/beta) M``
    and ``upper = Gamma(1 + n(p beta - sigma)/(p beta))^p M`` where
    ``M = E zeta([0,1]^p)^n``. For ``p = 1`` both equal the exact value.
    """
    b, s, p = params.beta, params.sigma, params.p
    g = n * (p * b - s) / b
    lower = p ** (-g - 1.0) * math.gamma(1.0 + g) * unit_moment
    upper = math.gamma(1.0 + g / p) ** p * unit_moment
    return lower, upper


def fixed_time_bound(params: ModelParams, n: int, t: Sequence[float], unit_moment: float) -> float:
    """``(t_1...t_p)^(n(p beta - sigma)/(p beta)) E zeta([0,1]^p)^n``."""
    b, s, p = params.beta, params.sigma, params.p
    return float(np.prod(t)) ** (n * (p * b - s) / (p * b)) * unit_moment


def moment_growth_sequence(params: ModelParams, moments: Sequence[float]) -> np.ndarray:
    """``a_m = (1/m) log(E zeta(tau box)^m / (m!)^p)`` for ``m = 1, 2, ...``."""
    out = []
    for m, v in enumerate(moments, start=1):
        out.append((math.log(v) - params.p * math.lgamma(m + 1)) / m)
    return np.array(out)


# ---------------------------------------------------------------- Fourier


@dataclass(frozen=True)
class FrequencyConfig:
    """Settings of the Fourier importance sampler.

    Parameters
    ----------
    m : int
        Moment order, ``1 <= m <= 8``.
    params : ModelParams
    truncation : float
        Frequencies with ``|lam_k| > truncation`` are dropped. The
        dropped mass is reported by ``tail_mass_indicator``.
    proposal_exponent : float, optional
        Exponent ``a`` of the radial proposal density
        ``r^(sigma-1) (1 + r^beta)^(-a)``. Default: midpoint of the
        range giving finite variance, see :func:`default_proposal_exponent`.
    mixture_weight : float
        Probability of the product component; the rest uses the chain
        component that follows prefix sums.
    n_samples : int
    """

    m: int
    params: ModelParams
    truncation: float = 1e12
    proposal_exponent: Optional[float] = None
    mixture_weight: float = 0.5
    n_samples: int = 200_000

    def __post_init__(self):
        _check_order(self.m)
        if not self.truncation > 0:
            raise DomainError("truncation must be positive")
        if not 0.0 < self.mixture_weight <= 1.0:
            raise DomainError("mixture_weight must lie in (0, 1]")
        if int(self.n_samples) != self.n_samples or self.n_samples < 2:
            raise DomainError("n_samples must be an integer >= 2")


def default_proposal_exponent(params: ModelParams) -> float:
    b, s, p, d = params.beta, params.sigma, params.p, params.d
    lo = s / b
    hi = p - max(0.0, 2 * s - d) / (2 * b)
    return 0.5 * (lo + hi) if hi > lo else lo + 0.25


class _RadialProposal:
    """Isotropic density ``prop. to |lam|^(sigma-d) (1 + |lam|^beta)^(-a)``."""

    def __init__(self, params: ModelParams, a: float):
        b, s, d = params.beta, params.sigma, params.d
        if not a > s / b:
            raise DomainError("proposal exponent must exceed sigma/beta")
        self.b, self.s, self.d, self.a = b, s, d, a
        self.A, self.B = s / b, a - s / b
        self.log_norm = special.betaln(self.A, self.B) - math.log(b) + math.log(sphere_area(d))

    def logpdf(self, lam):
        r = np.maximum(np.linalg.norm(lam, axis=-1), 1e-300)
        return (self.s - self.d) * np.log(r) - self.a * np.log1p(r**self.b) - self.log_norm

    def draw(self, rng, n):
        # r^beta is a ratio of Gamma(A) and Gamma(B) variables (beta prime).
        lu = np.log(rng.standard_gamma(self.A, size=n)) - np.log(rng.standard_gamma(self.B, size=n))
        r = np.exp(np.clip(lu / self.b, -700.0, 700.0))
        v = rng.standard_normal(size=(n, self.d))
        v /= np.linalg.norm(v, axis=1)[:, None]
        return r[:, None] * v

    def tail_mass(self, R):
        """Proposal probability of ``|lam| > R``."""
        x = R**self.b / (1 + R**self.b)
        return float(special.betainc(self.B, self.A, 1 - x))


def _fourier_chunk(cfg, prop, z, seed, chunk, n):
    with np.errstate(over="ignore", under="ignore", divide="ignore"):
        return _fourier_chunk_raw(cfg, prop, z, seed, chunk, n)


def _fourier_chunk_raw(cfg: FrequencyConfig, prop: _RadialProposal, z, seed, chunk, n):
    prm = cfg.params
    m, d, p = cfg.m, prm.d, prm.p
    rng = make_rng(seed, STREAM_FOURIER, chunk)
    perms = np.array(list(itertools.permutations(range(m))))
    comp = rng.random(n) < cfg.mixture_weight
    lam = np.empty((n, m, d))
    n_prod = int(comp.sum())
    lam[comp] = prop.draw(rng, n_prod * m).reshape(n_prod, m, d)
    n_chain = n - n_prod
    mu = prop.draw(rng, n_chain * m).reshape(n_chain, m, d)
    pick = rng.integers(len(perms), size=n_chain)
    steps = np.diff(mu, axis=1, prepend=0.0)
    chain = np.empty_like(steps)
    rows = np.arange(n_chain)
    for k in range(m):
        chain[rows, perms[pick, k]] = steps[:, k]
    lam[~comp] = chain

    q = _q_default(prm.beta)
    log_prod = prop.logpdf(lam).sum(axis=1)
    chain_dens = np.zeros(n)
    S = np.zeros(n)
    for perm in perms:
        cs = np.cumsum(lam[:, perm], axis=1)
        chain_dens += np.exp(prop.logpdf(cs).sum(axis=1))
        S += np.prod(q(cs), axis=1)
    chain_dens /= len(perms)
    dens = cfg.mixture_weight * np.exp(log_prod) + (1 - cfg.mixture_weight) * chain_dens

    r = np.linalg.norm(lam, axis=-1)
    keep = np.all(r <= cfg.truncation, axis=1) & (dens > 0)
    C = riesz_constant(d, prm.sigma)
    log_phi = np.sum(math.log(C) - (d - prm.sigma) * np.log(np.maximum(r, 1e-300)), axis=1)
    w = np.zeros(n)
    w[keep] = np.exp(log_phi[keep] + p * np.log(S[keep]) - np.log(dens[keep]))
    phase = lam.sum(axis=1) @ z
    return w * np.cos(phase), w * np.sin(phase), w


def moment_fourier(config: FrequencyConfig, z=None, seed: int = 0, threads: int = 1) -> MomentEstimate:
    """Importance-sampled ``E zeta^z(tau box)^m`` from the frequency form.

    Samples are drawn in fixed chunks, each from its own stream keyed by
    ``(seed, chunk)``, so the result does not depend on ``threads``.

    Raises
    ------
    NonIntegrable
        If the effective sample size falls below 1% of ``n_samples``.
    """
    prm = config.params
    zt = prm.z_array if z is None else np.asarray(z, dtype=float).reshape(prm.d)
    a = config.proposal_exponent or default_proposal_exponent(prm)
    prop = _RadialProposal(prm, a)
    N = int(config.n_samples)
    sizes = [min(FOURIER_CHUNK, N - s) for s in range(0, N, FOURIER_CHUNK)]
    jobs = [(config, prop, zt, seed, i, n) for i, n in enumerate(sizes)]
    if threads > 1:
        with ThreadPoolExecutor(threads) as ex:
            parts = list(ex.map(lambda j: _fourier_chunk(*j), jobs))
    else:
        parts = [_fourier_chunk(*j) for j in jobs]
    re = np.concatenate([x[0] for x in parts])
    im = np.concatenate([x[1] for x in parts])
    w = np.concatenate([x[2] for x in parts])
    if not np.all(np.isfinite(re)):
        raise NonIntegrable("non-finite importance weights")
    ess = float(np.sum(w) ** 2 / np.sum(w * w)) if np.any(w > 0) else 0.0
    if ess < 0.01 * N:
        raise NonIntegrable(f"effective sample size {ess:.0f} below 1% of {N}")
    C = riesz_constant(prm.d, prm.sigma)
    b, s = prm.beta, prm.sigma
    R = config.truncation
    single_tail = C * sphere_area(prm.d) * R ** (s - prm.p * b) / (prm.p * b - s)
    m = config.m
    diag = {
        "imag_mean": float(np.mean(im)),
        "imag_std_error": float(np.std(im, ddof=1) / math.sqrt(N)),
        "ess_fraction": ess / N,
        "proposal_exponent": a,
        "truncation": R,
        "tail_mass_indicator": m * math.factorial(m) ** prm.p
        * first_moment_closed_form(prm) ** (m - 1) * single_tail,
    }
    return MomentEstimate(m, float(np.mean(re)), float(np.std(re, ddof=1) / math.sqrt(N)),
                          "fourier-MC", prm, tuple(map(float, zt)), N, seed, diag)


# -------------------------------------------------------------- path MC


def _path_replicate(prm, orders, weights, dt, z, seed, i, head_levels):
    rng = make_rng(seed, STREAM_PATH_MC, i)
    tau = sample_exponential_horizon(1.0, rng, size=prm.p)
    grid = TimeGrid.from_step(dt, float(tau.max()))
    bundle = sample_path_bundle(prm, grid, rng, head_levels=head_levels)
    F, W = field_points(bundle, BoxSpec(tuple(tau), True))
    eps = step_scale(bundle) * np.asarray(EPS_RATIOS)
    vals = kernel_sums(F, W, z[None], prm.sigma, eps)[0]
    return np.array([weights @ vals**m for m in orders])


def moment_path_mc_orders(params: ModelParams, orders: Sequence[int], n_bundles: int,
                          n_steps: int, seed: int = 0, z=None, threads: int = 1,
                          horizon_quantile: float = 0.999, head_levels: int = 12
                          ) -> Dict[int, MomentEstimate]:
    """Path Monte Carlo estimates of several moment orders from shared draws.

    Each replicate draws ``p`` rate-one exponential horizons and paths on
    a grid of spacing ``T / n_steps`` where ``T`` is the
    ``horizon_quantile`` of the exponential law; the grid is extended when
    a horizon exceeds ``T``. The functional is evaluated at
    ``eps = h, h/2, h/4`` and the powers are extrapolated to ``eps = 0``
    per replicate.
    """
    orders = [_check_order(m) for m in orders]
    if n_bundles < 2:
        raise DomainError("n_bundles must be >= 2")
    zt = params.z_array if z is None else np.asarray(z, dtype=float).reshape(params.d)
    dt = -math.log1p(-horizon_quantile) / int(n_steps)
    wts = extrapolation_weights(params)
    job = lambda i: _path_replicate(params, orders, wts, dt, zt, seed, i, head_levels)
    if threads > 1:
        with ThreadPoolExecutor(threads) as ex:
            rows = list(ex.map(job, range(n_bundles)))
    else:
        rows = [job(i) for i in range(n_bundles)]
    Y = np.vstack(rows)
    out = {}
    for j, m in enumerate(orders):
        y = Y[:, j]
        mean = float(np.mean(y))
        top = np.sort(np.abs(y))[::-1][: max(1, n_bundles // 100)]
        heavy = bool(np.sum(top) > 0.5 * np.sum(np.abs(y)))
        out[m] = MomentEstimate(m, mean, float(np.std(y, ddof=1) / math.sqrt(n_bundles)),
                                "path-MC", params, tuple(map(float, zt)), n_bundles, seed,
                                {"heavy_tail": heavy, "n_steps": int(n_steps),
                                 "dt": dt, "eps_weights": wts.tolist()})
    return out


def moment_path_mc(params: ModelParams, m: int, n_bundles: int, n_steps: int,
                   seed: int = 0, z=None, threads: int = 1, **kw) -> MomentEstimate:
    """Path Monte Carlo estimate of ``E zeta^z(tau box)^m``."""
    return moment_path_mc_orders(params, [m], n_bundles, n_steps, seed, z, threads, **kw)[m]
