"""Experiments: tail fits, scaling tests and Sobolev property suites."""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np
from scipy import stats

from .errors import DomainError, InsufficientTail
from .evaluator import kernel_sums
from .moments import FrequencyConfig, moment_fourier, moment_growth_sequence
from .params import ModelParams, km_transfer, ldp_rate_constant, scaling_exponent
from .rng import make_rng
from .sampler import DEFAULT_HEAD_LEVELS, TimeGrid, _node_layout, simulate_at_times
from .sobolev import (CubeGrid, convolution_sides, correlation_sides,
                      random_test_function)

__all__ = [
    "sample_zeta_cube",
    "TailFit",
    "fit_tail",
    "run_tail_experiment",
    "KSReport",
    "run_scaling_test",
    "SobolevReport",
    "run_sobolev_checks",
    "wilson_interval",
    "TAIL_LEVELS",
]

STREAM_CUBE = 31
STREAM_SOBOLEV = 41
CUBE_CHUNK = 2048
TAIL_LEVELS = (0.99, 0.995, 0.998, 0.999, 0.9995, 0.9999)


def _cube_chunk(params, t, n_steps, eps_ratio, z, seed, stream, chunk, size):
    rng = make_rng(seed, stream, chunk)
    grid = TimeGrid(float(t), int(n_steps))
    lo, hi, mid = _node_layout(grid, DEFAULT_HEAD_LEVELS)
    w = hi - lo
    vals = simulate_at_times(params.beta, params.d, mid, rng, batch=(size, params.p))
    eps = eps_ratio * grid.dt ** (1.0 / params.beta)
    out = np.empty(size)
    if params.p == 1:
        diff = vals[:, 0] - z
        r2 = np.einsum("bnd,bnd->bn", diff, diff)
        out[:] = np.sum((r2 + eps * eps) ** (-0.5 * params.sigma) * w, axis=1)
        return out
    for b in range(size):
        F = vals[b, 0]
        W = w
        for l in range(1, params.p):
            F = (F[:, None, :] + vals[b, l][None, :, :]).reshape(-1, params.d)
            W = (W[:, None] * w[None, :]).reshape(-1)
        out[b] = kernel_sums(F, W, z[None], params.sigma, [eps])[0, 0]
    return out


def sample_zeta_cube(params: ModelParams, t: float, n: int, n_steps: int, seed: int,
                     stream: int = STREAM_CUBE, z=None, eps_ratio: float = 1.0,
                     threads: int = 1) -> np.ndarray:
    """``n`` independent values of ``zeta^z([0,t]^p)`` with regularized kernel.

    Each path uses ``n_steps`` cells on ``[0, t]`` and the kernel
    ``(|x|^2 + eps^2)^(-sigma/2)`` with ``eps = eps_ratio dt^(1/beta)``.
    Because ``eps`` follows the step scale the discrete functional obeys
    the same scaling law as the continuum one. Work is split into fixed
    chunks with streams ``(seed, stream, chunk)``.
    """
    zt = np.zeros(params.d) if z is None else np.asarray(z, dtype=float).reshape(params.d)
    sizes = [min(CUBE_CHUNK, n - s) for s in range(0, n, CUBE_CHUNK)]
    job = lambda a: _cube_chunk(params, t, n_steps, eps_ratio, zt, seed, stream, a[0], a[1])
    if threads > 1:
        with ThreadPoolExecutor(threads) as ex:
            parts = list(ex.map(job, enumerate(sizes)))
    else:
        parts = [job(a) for a in enumerate(sizes)]
    return np.concatenate(parts) if parts else np.empty(0)


def wilson_interval(k: int, n: int, zq: float = 1.959963984540054):
    """Wilson score interval for a binomial proportion."""
    ph = k / n
    den = 1 + zq * zq / n
    c = (ph + zq * zq / (2 * n)) / den
    hw = zq * math.sqrt(ph * (1 - ph) / n + zq * zq / (4 * n * n)) / den
    return max(0.0, c - hw), min(1.0, c + hw)


@dataclass
class TailFit:
    """Weighted least-squares fit of ``log P(zeta >= t)`` against ``t^(beta/sigma)``."""

    thresholds: List[float]
    counts: List[int]
    n_samples: int
    log_survival: List[float]
    wilson_low: List[float]
    wilson_high: List[float]
    slope: float
    slope_std_error: float
    slope_ci: tuple
    intercept: float
    theoretical_slope: float
    rho: float
    tolerance_factor: float = 2.0
    moment_predicted_slope: Optional[float] = None
    extra: dict = field(default_factory=dict)

    @property
    def ratio(self) -> float:
        return self.slope / self.theoretical_slope

    @property
    def consistent(self) -> bool:
        """True if the fitted and predicted slopes agree within the tolerance factor."""
        r = self.ratio
        return r > 0 and 1 / self.tolerance_factor <= r <= self.tolerance_factor

    def to_record(self) -> dict:
        rec = {
            "thresholds": self.thresholds,
            "counts": self.counts,
            "n_samples": self.n_samples,
            "log_survival": self.log_survival,
            "wilson_low": self.wilson_low,
            "wilson_high": self.wilson_high,
            "slope": self.slope,
            "slope_std_error": self.slope_std_error,
            "slope_ci": list(self.slope_ci),
            "intercept": self.intercept,
            "theoretical_slope": self.theoretical_slope,
            "rho": self.rho,
            "ratio": self.ratio,
            "tolerance_factor": self.tolerance_factor,
            "consistent": self.consistent,
            "moment_predicted_slope": self.moment_predicted_slope,
        }
        rec.update(self.extra)
        return rec


def fit_tail(samples, params: ModelParams, rho: float, thresholds: Optional[Sequence[float]] = None,
             levels: Sequence[float] = TAIL_LEVELS, tolerance_factor: float = 2.0) -> TailFit:
    """Fit the tail slope of ``samples`` in the ``t^(beta/sigma)`` coordinate.

    Thresholds default to the empirical quantiles at ``levels``. Only
    thresholds with at least one exceedance enter the fit, each weighted
    by the inverse delta-method variance ``N P / (1 - P)`` of ``log P``.

    Raises
    ------
    InsufficientTail
        If fewer than three thresholds have at least ten exceedances.
    """
    x = np.sort(np.asarray(samples, dtype=float))
    N = len(x)
    if thresholds is None:
        thresholds = np.quantile(x, levels)
    th = np.asarray(thresholds, dtype=float)
    counts = N - np.searchsorted(x, th, side="left")
    if np.sum(counts >= 10) < 3:
        raise InsufficientTail(f"exceedance counts {counts.tolist()} leave fewer than 3 usable thresholds")
    use = counts > 0
    P = counts[use] / N
    y = np.log(P)
    X = th[use] ** (params.beta / params.sigma)
    w = N * P / np.maximum(1 - P, 1.0 / N)
    xm = np.sum(w * X) / np.sum(w)
    ym = np.sum(w * y) / np.sum(w)
    sxx = np.sum(w * (X - xm) ** 2)
    slope = float(np.sum(w * (X - xm) * (y - ym)) / sxx)
    se = float(1.0 / math.sqrt(sxx))
    wil = [wilson_interval(int(k), N) for k in counts]
    theo = -ldp_rate_constant(params, rho).ldp_rate
    return TailFit(
        thresholds=[float(v) for v in th],
        counts=[int(k) for k in counts],
        n_samples=N,
        log_survival=[float(math.log(k / N)) if k > 0 else float("-inf") for k in counts],
        wilson_low=[float(a) for a, _ in wil],
        wilson_high=[float(b) for _, b in wil],
        slope=slope,
        slope_std_error=se,
        slope_ci=(slope - 1.959963984540054 * se, slope + 1.959963984540054 * se),
        intercept=float(ym - slope * xm),
        theoretical_slope=float(theo),
        rho=float(rho),
        tolerance_factor=float(tolerance_factor),
    )


def moment_predicted_slope(params: ModelParams, exp_moments: Sequence[float]) -> float:
    """Tail slope from the last term of the exponential-box growth sequence."""
    a = moment_growth_sequence(params, exp_moments)[-1]
    b, p, s = params.beta, params.p, params.sigma
    growth = ((p * b - s) / b) * math.log(p * b / (p * b - s)) + a
    return km_transfer(s / b, growth)


def run_tail_experiment(params: ModelParams, rho: float, n_samples: int, n_steps: int,
                        seed: int, threads: int = 1, tolerance_factor: float = 2.0,
                        moment_orders: int = 3, moment_samples: int = 200_000,
                        eps_ratio: float = 0.5) -> tuple:
    """Tail fit of ``zeta([0,1]^p)`` from ``n_samples`` replicates.

    Returns ``(fit, samples)``. When ``moment_orders > 0`` the fit also
    carries the slope predicted from Fourier moments of orders
    ``1..moment_orders``. The regularization ``eps = eps_ratio dt^(1/beta)``
    thins the far tail, so finer steps and smaller ``eps_ratio`` move the
    fitted slope toward its limit.
    """
    if not rho > 0:
        raise DomainError("rho must be positive")
    xs = sample_zeta_cube(params, 1.0, n_samples, n_steps, seed, eps_ratio=eps_ratio,
                          threads=threads)
    fit = fit_tail(xs, params, rho, tolerance_factor=tolerance_factor)
    fit.extra.update({"n_steps": int(n_steps), "eps_ratio": float(eps_ratio)})
    if moment_orders > 0:
        mom = [moment_fourier(FrequencyConfig(m, params, n_samples=moment_samples), seed=seed,
                              threads=threads).value for m in range(1, moment_orders + 1)]
        fit.moment_predicted_slope = float(moment_predicted_slope(params, mom))
        fit.extra["fourier_moments"] = [float(v) for v in mom]
    return fit, xs


@dataclass
class KSReport:
    """Two-sample Kolmogorov-Smirnov comparison of both sides of the scaling law."""

    t_factor: float
    exponent: float
    statistic: float
    p_value: float
    n: int
    level: float = 0.01

    @property
    def passed(self) -> bool:
        return self.p_value > self.level

    def to_record(self) -> dict:
        return {"t_factor": self.t_factor, "exponent": self.exponent, "statistic": self.statistic,
                "p_value": self.p_value, "n": self.n, "level": self.level, "passed": self.passed}


def run_scaling_test(params: ModelParams, t_factor: float, n: int, n_steps: int, seed: int,
                     exponent_shift: float = 0.0, rep: int = 0, threads: int = 1,
                     return_samples: bool = False):
    """KS test of ``zeta^z([0,t]^p)`` against ``t^a zeta^(z/t^(1/beta))([0,1]^p)``.

    ``exponent_shift`` perturbs ``a`` for negative controls. ``rep``
    selects independent repetitions.
    """
    if not t_factor > 0:
        raise DomainError("t_factor must be positive")
    a, b = scaling_exponent(params)
    a = a + exponent_shift
    z = params.z_array
    left = sample_zeta_cube(params, t_factor, n, n_steps, seed, stream=STREAM_CUBE + 2 * rep + 1,
                            z=z, threads=threads)
    right = t_factor**a * sample_zeta_cube(params, 1.0, n, n_steps, seed,
                                           stream=STREAM_CUBE + 2 * rep + 2,
                                           z=z / t_factor**b, threads=threads)
    res = stats.ks_2samp(left, right)
    rep_ = KSReport(float(t_factor), float(a), float(res.statistic), float(res.pvalue), int(n))
    return (rep_, left, right) if return_samples else rep_


@dataclass
class SobolevReport:
    """Empirical constants and homogeneity residuals of both inequalities."""

    conv_ratios: List[float]
    corr_ratios: List[float]
    conv_ratios_fine: List[float]
    corr_ratios_fine: List[float]
    conv_homogeneity_error: float
    corr_homogeneity_error: float
    skipped_zero: int

    @property
    def conv_constant(self) -> float:
        return max(self.conv_ratios)

    @property
    def corr_constant(self) -> float:
        return max(self.corr_ratios)

    @property
    def conv_drift(self) -> float:
        return abs(max(self.conv_ratios_fine) / self.conv_constant - 1)

    @property
    def corr_drift(self) -> float:
        return abs(max(self.corr_ratios_fine) / self.corr_constant - 1)

    def to_record(self) -> dict:
        return {
            "conv_constant": self.conv_constant,
            "corr_constant": self.corr_constant,
            "conv_constant_fine": max(self.conv_ratios_fine),
            "corr_constant_fine": max(self.corr_ratios_fine),
            "conv_drift": self.conv_drift,
            "corr_drift": self.corr_drift,
            "conv_homogeneity_error": self.conv_homogeneity_error,
            "corr_homogeneity_error": self.corr_homogeneity_error,
            "skipped_zero": self.skipped_zero,
            "trials": len(self.conv_ratios),
        }


def _weight_function(rng, grid: CubeGrid):
    """Positive weight ``a + b |x|^2 + bump`` for the correlation form."""
    a, b = rng.uniform(0.2, 2.0), rng.uniform(0.0, 3.0)
    bump = random_test_function(rng, grid.d, grid.half_width, kinds=("gauss",))
    return lambda g: a + b * np.sum(g.coords() ** 2, axis=-1) + bump.sample(g)


def run_sobolev_checks(params: ModelParams, trials: int, n: int, seed: int,
                       half_width: float = 1.0) -> SobolevReport:
    """Random-trial suite for the convolution and correlation inequalities.

    Each trial draws finitely supported test functions, evaluates the
    ratio of the two sides on a grid with ``n`` cells per side and on the
    refined grid, and measures the residual of the exact dilation
    identities (same samples, doubled spacing).
    """
    d, p, s = params.d, params.p, params.sigma
    g0 = CubeGrid(d, n, half_width)
    g1 = g0.refined()
    conv, corr, conv_f, corr_f = [], [], [], []
    herr_conv = herr_corr = 0.0
    skipped = 0
    fac_conv = 2.0 ** ((p - 1) * d + s)
    fac_corr = 2.0 ** (d + s / p)
    for i in range(trials):
        rng = make_rng(seed, STREAM_SOBOLEV, i)
        fs = [random_test_function(rng, d, half_width) for _ in range(p)]
        hfun = _weight_function(rng, g0)
        arr = [f.sample(g0) for f in fs]
        if all(not np.any(a) for a in arr):
            skipped += 1
            continue
        l, r = convolution_sides(arr, g0.spacing, s)
        l2, r2 = convolution_sides(arr, 2 * g0.spacing, s)
        herr_conv = max(herr_conv, abs(l2 / (fac_conv * l) - 1), abs(r2 / (fac_conv * r) - 1))
        conv.append(l / r)
        conv_f.append(np.divide(*convolution_sides([f.sample(g1) for f in fs], g1.spacing, s)))
        h0 = hfun(g0)
        l, r = correlation_sides(arr[0], arr[-1], h0, g0.spacing, s, p)
        l2, r2 = correlation_sides(arr[0], arr[-1], h0, 2 * g0.spacing, s, p)
        herr_corr = max(herr_corr, abs(l2 / (fac_corr * l) - 1), abs(r2 / (fac_corr * r) - 1))
        corr.append(l / r)
        corr_f.append(np.divide(*correlation_sides(fs[0].sample(g1), fs[-1].sample(g1), hfun(g1),
                                                   g1.spacing, s, p)))
    return SobolevReport([float(v) for v in conv], [float(v) for v in corr],
                         [float(v) for v in conv_f], [float(v) for v in corr_f],
                         float(herr_conv), float(herr_corr), skipped)
