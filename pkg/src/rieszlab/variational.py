"""Variational constant over radial trial functions.

The objective on the unit sphere of L^2(R^d) is

``Lambda(theta) = sup_g { theta L(g) - E_beta(g, g) }``

with ``L(g) = (int phi(lam) h_hat(lam)^p dlam)^(1/p)`` for ``h = g^2``
and ``E_beta(g, g) = (2 pi)^-d int |lam|^beta |g_hat|^2``. Trial
functions are finite sums of centred Gaussians ``exp(-|x|^2 / (2 s_i^2))``
whose transforms, overlaps and energies are analytic; only the radial
frequency integral defining ``L`` is done by quadrature.

Fourier convention: ``f_hat(lam) = int e^{i x.lam} f(x) dx``.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import List, Optional

import numpy as np
from scipy import linalg, optimize, special

from .errors import DomainError, GridTooCoarse, NonConvergence
from .params import ModelParams, riesz_constant, sphere_area
from .rng import make_rng

__all__ = [
    "GridSpec",
    "OptimizerSpec",
    "RadialFunction",
    "VariationalResult",
    "DualityReport",
    "gaussian_trial",
    "dirichlet_energy",
    "riesz_self_energy",
    "objective_and_gradient",
    "maximize_lambda",
    "lambda_eigen_p1",
    "j_duality_check",
    "theta_scaling",
    "rho_from_lambda",
    "herbst_constant",
    "finiteness_radius",
]

STREAM_VARIATIONAL = 21


@dataclass(frozen=True)
class GridSpec:
    """Discretization of the trial space.

    Parameters
    ----------
    r_min, r_max : float
        Range of the log-spaced radial grid used for values and checks.
    n_radii : int
        Number of radial grid points.
    n_basis : int
        Number of Gaussian widths, log-spaced in
        ``[width_lo * r_min, r_max / width_hi]``.
    n_freq : int
        Number of log-spaced frequencies for the ``L`` quadrature.
    """

    r_min: float = 1e-3
    r_max: float = 1e2
    n_radii: int = 512
    n_basis: int = 40
    n_freq: int = 600
    width_lo: float = 5.0
    width_hi: float = 6.0

    def __post_init__(self):
        if not 0 < self.r_min < self.r_max:
            raise DomainError("need 0 < r_min < r_max")
        for name in ("n_radii", "n_basis", "n_freq"):
            if getattr(self, name) < 4:
                raise DomainError(f"{name} must be >= 4")

    def refined(self) -> "GridSpec":
        """Every resolution doubled."""
        return replace(self, n_radii=2 * self.n_radii, n_basis=2 * self.n_basis,
                       n_freq=2 * self.n_freq)

    def radii(self) -> np.ndarray:
        return np.geomspace(self.r_min, self.r_max, self.n_radii)

    def widths(self) -> np.ndarray:
        return np.geomspace(self.width_lo * self.r_min, self.r_max / self.width_hi, self.n_basis)

    def to_record(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


@dataclass(frozen=True)
class OptimizerSpec:
    """Settings of the projected ascent."""

    restarts: int = 4
    max_iter: int = 400
    tol: float = 1e-13
    width_range: tuple = (0.2, 5.0)

    def to_record(self) -> dict:
        return {"restarts": self.restarts, "max_iter": self.max_iter, "tol": self.tol,
                "width_range": list(self.width_range)}


def _radial_weights(r: np.ndarray, d: int) -> np.ndarray:
    """Trapezoid weights in ``log r`` for ``int_{R^d} f(|x|) dx``."""
    lr = np.log(r)
    w = np.empty_like(r)
    w[1:-1] = 0.5 * (lr[2:] - lr[:-2])
    w[0] = 0.5 * (lr[1] - lr[0])
    w[-1] = 0.5 * (lr[-1] - lr[-2])
    return sphere_area(d) * r**d * w


def _overlap(si, sj, d):
    si2, sj2 = np.asarray(si)[:, None] ** 2, np.asarray(sj)[None, :] ** 2
    return (2 * np.pi * si2 * sj2 / (si2 + sj2)) ** (d / 2)


def _energy_matrix(s, d, beta):
    si, sj = s[:, None], s[None, :]
    a = 0.5 * (si**2 + sj**2)
    return (si * sj) ** d * sphere_area(d) * math.gamma((d + beta) / 2) / (2 * a ** ((d + beta) / 2))


@dataclass
class RadialFunction:
    """Radial function ``g(r) = sum_i c_i exp(-r^2 / (2 s_i^2))``.

    Attributes
    ----------
    radii : ndarray
        Log-spaced grid.
    values : ndarray
        ``g`` on ``radii``.
    d : int
    weights : ndarray
        Quadrature weights for ``int_{R^d}`` of radial functions on ``radii``.
    widths, coeffs : ndarray
        Gaussian representation.
    """

    radii: np.ndarray
    values: np.ndarray
    d: int
    weights: np.ndarray
    widths: np.ndarray
    coeffs: np.ndarray

    @classmethod
    def from_coefficients(cls, widths, coeffs, d: int, radii) -> "RadialFunction":
        widths = np.asarray(widths, dtype=float)
        coeffs = np.asarray(coeffs, dtype=float)
        radii = np.asarray(radii, dtype=float)
        vals = np.exp(-0.5 * (radii[:, None] / widths[None, :]) ** 2) @ coeffs
        return cls(radii, vals, int(d), _radial_weights(radii, d), widths, coeffs)

    def __call__(self, r) -> np.ndarray:
        r = np.asarray(r, dtype=float)
        return np.exp(-0.5 * (r[..., None] / self.widths) ** 2) @ self.coeffs

    def norm2_exact(self) -> float:
        return float(self.coeffs @ _overlap(self.widths, self.widths, self.d) @ self.coeffs)

    def norm2_grid(self) -> float:
        return float(np.sum(self.weights * self.values**2))

    def normalized(self) -> "RadialFunction":
        c = self.coeffs / math.sqrt(self.norm2_exact())
        return RadialFunction.from_coefficients(self.widths, c, self.d, self.radii)

    def dilated(self, eps: float) -> "RadialFunction":
        """``g_eps(x) = eps^(d/2) g(eps x)``, which preserves the L^2 norm."""
        return RadialFunction.from_coefficients(self.widths / eps, self.coeffs * eps ** (self.d / 2),
                                                self.d, self.radii)

    def transform(self, k) -> np.ndarray:
        """Radial Fourier transform ``g_hat(k)``."""
        k = np.asarray(k, dtype=float)
        s = self.widths
        return (2 * np.pi) ** (self.d / 2) * (np.exp(-0.5 * (k[..., None] * s) ** 2) * s**self.d) @ self.coeffs

    def decay_ratio(self) -> float:
        return float(abs(self.values[-1]) / np.max(np.abs(self.values)))

    def to_csv_rows(self):
        return [[float(r), float(v)] for r, v in zip(self.radii, self.values)]


def gaussian_trial(width: float, d: int, radii=None, grid: Optional[GridSpec] = None) -> RadialFunction:
    """Normalized single Gaussian ``exp(-|x|^2 / (2 width^2))``."""
    radii = (grid or GridSpec()).radii() if radii is None else radii
    g = RadialFunction.from_coefficients([width], [1.0], d, radii)
    return g.normalized()


def _check_parseval(g: RadialFunction, tol: float = 1e-2) -> None:
    a, b = g.norm2_grid(), g.norm2_exact()
    if abs(a - b) > tol * b:
        raise GridTooCoarse(f"grid norm {a:.6g} differs from transform norm {b:.6g}")


def dirichlet_energy(g: RadialFunction, beta: float) -> float:
    """``E_beta(g, g) = (2 pi)^-d int |lam|^beta |g_hat|^2 dlam``.

    Raises
    ------
    GridTooCoarse
        If the radial grid norm and the transform-side norm differ by more
        than 1%.
    """
    if not 0 < beta <= 2:
        raise DomainError("beta must lie in (0, 2]")
    _check_parseval(g)
    H = _energy_matrix(g.widths, g.d, beta)
    return float(g.coeffs @ H @ g.coeffs)


def _freq_grid(widths, n_freq):
    k = np.geomspace(1e-4 / np.max(widths), 1e2 / np.min(widths), n_freq)
    return k, math.log(k[1] / k[0])


def _freq_weights(k, dlk, d, sigma):
    """Weights for ``int phi(lam) f(|lam|) dlam`` on a log grid."""
    C = riesz_constant(d, sigma) * sphere_area(d)
    w = C * k**sigma * dlk
    w[0] *= 0.5
    w[-1] *= 0.5
    w[0] += C * k[0] ** sigma / sigma
    return w


def _h_transform_tensor(widths, k, d):
    """``G[k, i, j]``: transform of ``exp(-r^2/(2 s_i^2)) exp(-r^2/(2 s_j^2))``."""
    si2, sj2 = widths[:, None] ** 2, widths[None, :] ** 2
    t2 = si2 * sj2 / (si2 + sj2)
    return (2 * np.pi) ** (d / 2) * t2[None] ** (d / 2) * np.exp(-0.5 * t2[None] * k[:, None, None] ** 2)


def riesz_self_energy(g: RadialFunction, params: ModelParams, n_freq: int = 600,
                      return_diagnostics: bool = False):
    """``L(g) = (int phi(lam) h_hat(lam)^p dlam)^(1/p)`` with ``h = g^2``.

    Returns ``L`` or, with ``return_diagnostics``, ``(L, info)`` where
    ``info['negative_transform']`` flags ``h_hat < -1e-6 max h_hat``.
    """
    if g.d != params.d:
        raise DomainError("dimension mismatch")
    _check_parseval(g)
    k, dlk = _freq_grid(g.widths, n_freq)
    G = _h_transform_tensor(g.widths, k, g.d)
    hh = np.einsum("kij,i,j->k", G, g.coeffs, g.coeffs)
    w = _freq_weights(k, dlk, params.d, params.sigma)
    Lp = float(np.sum(w * hh**params.p))
    L = Lp ** (1.0 / params.p)
    if return_diagnostics:
        return L, {"negative_transform": bool(np.min(hh) < -1e-6 * np.max(hh))}
    return L


class _Problem:
    """Discretized objective in coordinates orthonormal for the L^2 product."""

    def __init__(self, params: ModelParams, grid: GridSpec):
        self.params, self.grid = params, grid
        d = params.d
        self.s = grid.widths()
        S = _overlap(self.s, self.s, d)
        ev, V = linalg.eigh(S)
        keep = ev > 1e-12 * ev[-1]
        self.U = V[:, keep] / np.sqrt(ev[keep])
        self.H = self.U.T @ _energy_matrix(self.s, d, params.beta) @ self.U
        k, dlk = _freq_grid(self.s, grid.n_freq)
        G = _h_transform_tensor(self.s, k, d)
        self.G = np.einsum("ai,kab,bj->kij", self.U, G, self.U, optimize=True)
        self.w = _freq_weights(k, dlk, d, params.sigma)
        self.n = self.U.shape[1]

    def coeffs(self, y):
        return self.U @ y

    def parts(self, y):
        p = self.params.p
        hh = np.einsum("kij,i,j->k", self.G, y, y)
        Lp = float(np.sum(self.w * hh**p))
        return hh, Lp, float(y @ self.H @ y)

    def value(self, y, theta):
        hh, Lp, E = self.parts(y)
        return (theta * Lp ** (1 / self.params.p) - E) / float(y @ y)

    def veff(self, y):
        p = self.params.p
        hh, Lp, E = self.parts(y)
        V = Lp ** (1 / p - 1) * np.einsum("kij,k->ij", self.G, self.w * hh ** (p - 1))
        return V, Lp ** (1 / p), E


def objective_and_gradient(coeffs, params: ModelParams, grid: GridSpec = GridSpec(), theta: float = 1.0):
    """``theta L(g) - E_beta(g, g)`` and its gradient in the Gaussian coefficients.

    ``g`` need not be normalized. Used for finite-difference checks.
    """
    prm = params
    s = grid.widths()
    c = np.asarray(coeffs, dtype=float)
    k, dlk = _freq_grid(s, grid.n_freq)
    G = _h_transform_tensor(s, k, prm.d)
    w = _freq_weights(k, dlk, prm.d, prm.sigma)
    H = _energy_matrix(s, prm.d, prm.beta)
    hh = np.einsum("kij,i,j->k", G, c, c)
    Lp = np.sum(w * hh**prm.p)
    L = Lp ** (1 / prm.p)
    gL = 2 * Lp ** (1 / prm.p - 1) * np.einsum("kij,j,k->i", G, c, w * hh ** (prm.p - 1))
    return float(theta * L - c @ H @ c), theta * gL - 2 * H @ c


def _ascend(prob: _Problem, y0, theta, opt: OptimizerSpec):
    """Monotone ascent on the unit sphere.

    Each step tries the top eigenvector of the linearized operator
    ``theta V(y) - H`` as target, then a preconditioned gradient step,
    both with backtracking; a step is accepted only if it does not
    decrease the objective.
    """
    y = y0 / np.linalg.norm(y0)
    f = prob.value(y, theta)
    trace = [f]
    P = np.eye(prob.n) + prob.H
    Pc = linalg.cho_factor(P)
    last_gain = np.inf
    converged = False
    for _ in range(opt.max_iter):
        V, L, E = prob.veff(y)
        A = theta * V - prob.H
        dirs = []
        _, vec = linalg.eigh(A, subset_by_index=[prob.n - 1, prob.n - 1])
        v = vec[:, 0]
        if v @ y < 0:
            v = -v
        dirs.append(v - y)
        rg = 2 * (A @ y - f * y)
        dirs.append(linalg.cho_solve(Pc, rg))
        best_y, best_f = None, f
        for dvec in dirs:
            t = 1.0
            while t > 1e-12:
                yn = y + t * dvec
                yn /= np.linalg.norm(yn)
                fn = prob.value(yn, theta)
                if fn >= f:
                    if fn > best_f or best_y is None:
                        best_y, best_f = yn, fn
                    break
                t *= 0.5
            if best_y is not None and best_f - f > opt.tol * max(1.0, abs(f)):
                break
        if best_y is None:
            last_gain = 0.0
            converged = True
            break
        last_gain = best_f - f
        y, f = best_y, best_f
        trace.append(f)
        if last_gain <= opt.tol * max(1.0, abs(f)):
            converged = True
            break
    return y, f, trace, last_gain, converged


@dataclass
class VariationalResult:
    """Outcome of :func:`maximize_lambda`."""

    params: ModelParams
    theta: float
    lambda_sigma: float
    rho: float
    maximizer: RadialFunction
    traces: List[List[float]]
    restarts: int
    final_gains: List[float]
    grid: GridSpec
    optimizer: OptimizerSpec
    restart_values: List[float] = field(default_factory=list)

    @property
    def trace(self) -> List[float]:
        return self.traces[int(np.argmax(self.restart_values))]

    def to_record(self) -> dict:
        return {
            "params": self.params.to_record(),
            "theta": self.theta,
            "lambda_sigma": self.lambda_sigma,
            "rho": self.rho,
            "restarts": self.restarts,
            "restart_values": self.restart_values,
            "final_gains": self.final_gains,
            "traces": self.traces,
            "grid": self.grid.to_record(),
            "optimizer": self.optimizer.to_record(),
            "maximizer_decay_ratio": self.maximizer.decay_ratio(),
        }


def rho_from_lambda(params: ModelParams, lam: float) -> float:
    """``rho = Lambda^(p - sigma/beta)``."""
    return float(lam ** (params.p - params.sigma / params.beta))


def _initial_guesses(prob: _Problem, opt: OptimizerSpec, seed: int):
    d = prob.params.d
    S = _overlap(prob.s, prob.s, d)
    inits = []
    # Flat bump: equal weights on the widths inside the central range.
    lo, hi = opt.width_range
    c = ((prob.s >= lo) & (prob.s <= hi)).astype(float)
    inits.append(prob.U.T @ S @ c)
    for r in range(1, opt.restarts):
        rng = make_rng(seed, STREAM_VARIATIONAL, r)
        w = math.exp(rng.uniform(math.log(lo), math.log(hi)))
        b = _overlap(prob.s, [w], d)[:, 0]
        inits.append(prob.U.T @ b)
    return inits


def maximize_lambda(params: ModelParams, grid: GridSpec = GridSpec(),
                    optimizer: OptimizerSpec = OptimizerSpec(), seed: int = 0,
                    theta: float = 1.0, threads: int = 1) -> VariationalResult:
    """Maximize ``theta L(g) - E_beta(g, g)`` over normalized radial ``g``.

    Restart 0 starts from a flat bump, the others from Gaussians of random
    width drawn from stream ``(seed, restart)``. The best restart wins.
    The value is a lower bound for the supremum over all trial functions.

    Raises
    ------
    NonConvergence
        If every restart still improved by more than ``1e-8`` on its last
        iteration.
    """
    if not theta > 0:
        raise DomainError("theta must be positive")
    prob = _Problem(params, grid)
    inits = _initial_guesses(prob, optimizer, seed)
    job = lambda y0: _ascend(prob, y0, theta, optimizer)
    if threads > 1:
        with ThreadPoolExecutor(threads) as ex:
            runs = list(ex.map(job, inits))
    else:
        runs = [job(y0) for y0 in inits]
    vals = [r[1] for r in runs]
    gains = [float(r[3]) for r in runs]
    if all(g > 1e-8 for g in gains):
        raise NonConvergence(f"all restarts still improving, last gains {gains}")
    best = int(np.argmax(vals))
    y = runs[best][0]
    g = RadialFunction.from_coefficients(prob.s, prob.coeffs(y), params.d, grid.radii())
    lam = float(vals[best])
    return VariationalResult(params, float(theta), lam, rho_from_lambda(params, lam) if lam > 0 else float("nan"),
                             g, [list(map(float, r[2])) for r in runs], len(runs), gains,
                             grid, optimizer, [float(v) for v in vals])


def lambda_eigen_p1(params: ModelParams, grid: GridSpec = GridSpec(), theta: float = 1.0) -> float:
    """For ``p = 1`` the objective is a Rayleigh quotient: top eigenvalue."""
    if params.p != 1:
        raise DomainError("eigenvalue route requires p = 1")
    prob = _Problem(params, grid)
    V = np.einsum("kij,k->ij", prob.G, prob.w)
    return float(linalg.eigh(theta * V - prob.H, eigvals_only=True)[-1])


def theta_scaling(params: ModelParams, theta: float) -> float:
    """``Lambda(theta) / Lambda(1) = theta^(beta / (beta - sigma/p))``."""
    b = params.beta
    return float(theta ** (b / (b - params.sigma / params.p)))


@dataclass(frozen=True)
class DualityReport:
    """Check of ``Lambda(1/J) = 1`` with ``J = Lambda(1)^(1 - sigma/(p beta))``."""

    lambda_one: float
    J: float
    predicted: float
    measured: float
    discrepancy: float

    def to_record(self) -> dict:
        return {k: float(getattr(self, k)) for k in self.__dataclass_fields__}


def j_duality_check(result: VariationalResult, params: Optional[ModelParams] = None,
                    seed: int = 0, threads: int = 1) -> DualityReport:
    """Recompute the maximum at ``theta = 1/J`` and report ``Lambda(1/J) - 1``.

    ``predicted`` applies the exact theta scaling to ``result.lambda_sigma``;
    ``measured`` comes from a fresh optimization. The signed
    ``discrepancy`` is ``measured - 1``.
    """
    prm = params or result.params
    lam = result.lambda_sigma
    J = lam ** (1 - prm.sigma / (prm.p * prm.beta))
    predicted = theta_scaling(prm, 1 / J) * lam
    rerun = maximize_lambda(prm, result.grid, result.optimizer, seed, theta=1 / J, threads=threads)
    return DualityReport(lam, J, predicted, rerun.lambda_sigma, rerun.lambda_sigma - 1.0)


def herbst_constant(d: int, sigma: float) -> float:
    """Sharp ``C`` in ``int |x|^-sigma |g|^2 <= C (2 pi)^-d int |lam|^sigma |g_hat|^2``."""
    if not 0 < sigma < d:
        raise DomainError("need 0 < sigma < d")
    return float(2.0**-sigma * math.exp(2 * (special.gammaln((d - sigma) / 4) - special.gammaln((d + sigma) / 4))))


def _h_pr(params: ModelParams, r: float) -> float:
    """``(int (r + |lam|^beta)^(-p d/sigma) dlam)^(sigma/(p d + sigma))``."""
    b, d, p, s = params.beta, params.d, params.p, params.sigma
    a = p * d / s
    log_int = (math.log(sphere_area(d)) + (d / b - a) * math.log(r) - math.log(b)
               + special.betaln(d / b, a - d / b))
    return math.exp(log_int * s / (p * d + s))


def finiteness_radius(params: ModelParams, c_sobolev: Optional[float] = None) -> float:
    """``r`` with ``L(g) <= r + E_beta(g, g)`` for every normalized ``g``.

    For ``p = 1`` this uses the sharp Herbst inequality together with
    ``|lam|^sigma <= c_r (r + |lam|^beta)``, which gives a rigorous bound
    ``Lambda <= r``. For ``p >= 2`` it follows the chain
    convolution inequality -> Hausdorff-Young (Beckner constant) ->
    Hoelder with weight ``r + |lam|^beta``; the constant of the
    convolution inequality must be supplied and the result is only as
    reliable as that constant.
    """
    b, d, p, s = params.beta, params.d, params.p, params.sigma
    if p == 1:
        CH = herbst_constant(d, s)
        # c_r = (s/(b-s))^(s/b) (b-s)/b r^(s/b-1); solve CH c_r = 1.
        k = CH * (s / (b - s)) ** (s / b) * (b - s) / b
        return float(k ** (1.0 / (1.0 - s / b)))
    if c_sobolev is None:
        raise DomainError("p >= 2 needs the convolution-inequality constant")
    sx = 2 * p * d / (p * d + s)
    sp = sx / (sx - 1)
    beck = (sx ** (1 / sx) / sp ** (1 / sp)) ** (d / 2)
    pref = c_sobolev * beck**2 * (2 * np.pi) ** (-s / p)
    K = lambda r: pref * _h_pr(params, r) ** ((p * d + s) / (p * d)) - 1.0
    hi = 1.0
    while K(hi) > 0:
        hi *= 10.0
    lo = hi / 10.0
    while K(lo) < 0 and lo > 1e-300:
        lo /= 10.0
    return float(optimize.brentq(K, lo, hi, xtol=1e-14, rtol=1e-12))
