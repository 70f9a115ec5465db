"""Isotropic symmetric stable increments, paths and exponential horizons.

The process has characteristic function ``exp(-t |lam|^beta)``. For
``beta = 2`` increments are Gaussian with variance ``2 dt`` per
coordinate. For ``beta < 2`` an increment is a Gaussian vector run at an
independent positive ``beta/2``-stable clock, which keeps the law exactly
isotropic.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError
from .params import ModelParams

__all__ = [
    "TimeGrid",
    "PathBundle",
    "sample_stable_increment",
    "sample_positive_stable",
    "sample_exponential_horizon",
    "sample_path_bundle",
    "simulate_at_times",
    "DEFAULT_HEAD_LEVELS",
]

# Dyadic refinement depth of the first time cell (see PathBundle).
DEFAULT_HEAD_LEVELS = 12


@dataclass(frozen=True)
class TimeGrid:
    """Uniform grid ``0 = s_0 < ... < s_n = horizon``."""

    horizon: float
    n_steps: int

    def __post_init__(self):
        if not (self.horizon > 0 and math.isfinite(self.horizon)):
            raise DomainError(f"horizon must be positive, got {self.horizon}")
        if int(self.n_steps) != self.n_steps or self.n_steps < 1:
            raise DomainError(f"n_steps must be a positive integer, got {self.n_steps}")

    @property
    def dt(self) -> float:
        return self.horizon / self.n_steps

    def times(self) -> np.ndarray:
        return np.arange(self.n_steps + 1) * self.dt

    @classmethod
    def from_step(cls, dt: float, min_horizon: float) -> "TimeGrid":
        """Smallest grid with spacing ``dt`` covering ``min_horizon``."""
        n = max(1, int(math.ceil(min_horizon / dt - 1e-12)))
        return cls(horizon=n * dt, n_steps=n)


def _check_beta(beta: float) -> None:
    if not 0.0 < beta <= 2.0:
        raise DomainError(f"beta must lie in (0, 2], got {beta}")


def sample_positive_stable(alpha: float, rng: np.random.Generator, size=None):
    """Positive stable variable with ``E exp(-u S) = exp(-u^alpha)``.

    Uses the Chambers-Mallows-Stuck (Kanter) form
    ``S = sin(alpha U) / sin(U)^(1/alpha) * (sin((1-alpha) U) / W)^((1-alpha)/alpha)``
    with ``U ~ Uniform(0, pi)`` and ``W ~ Exp(1)``.
    """
    alpha = float(alpha)
    if not 0.0 < alpha < 1.0:
        raise DomainError(f"alpha must lie in (0, 1), got {alpha}")
    u = rng.uniform(0.0, math.pi, size=size)
    w = rng.standard_exponential(size=size)
    a = np.sin(alpha * u) / np.sin(u) ** (1.0 / alpha)
    b = (np.sin((1.0 - alpha) * u) / w) ** ((1.0 - alpha) / alpha)
    return a * b


def sample_stable_increment(beta: float, d: int, dt, rng: np.random.Generator, size=None):
    """Increment of the isotropic stable process over duration ``dt``.

    Parameters
    ----------
    beta : float
        Stability index in (0, 2].
    d : int
        Dimension.
    dt : float or array_like
        Durations, broadcast against ``size``.
    rng : numpy.random.Generator
    size : int or tuple, optional
        Batch shape. The result has shape ``size + (d,)``.
    """
    _check_beta(beta)
    dt = np.asarray(dt, dtype=float)
    if np.any(dt < 0):
        raise DomainError("dt must be nonnegative")
    if size is None:
        shape = dt.shape
    elif isinstance(size, (int, np.integer)):
        shape = (int(size),)
    else:
        shape = tuple(size)
    g = rng.standard_normal(size=shape + (int(d),))
    if beta == 2.0:
        var = 2.0 * np.broadcast_to(dt, shape)
    else:
        s1 = sample_positive_stable(beta / 2.0, rng, size=shape)
        var = 2.0 * np.broadcast_to(dt, shape) ** (2.0 / beta) * s1
    return g * np.sqrt(var)[..., None]


def sample_exponential_horizon(rate: float, rng: np.random.Generator, size=None):
    """Exponential variate(s) with the given rate."""
    rate = float(rate)
    if not rate > 0.0:
        raise DomainError(f"rate must be > 0, got {rate}")
    return rng.standard_exponential(size=size) / rate


def simulate_at_times(beta, d, times, rng, batch=()):
    """Values of independent paths at increasing ``times`` (all > 0).

    Returns an array of shape ``batch + (len(times), d)``.
    """
    times = np.asarray(times, dtype=float)
    dts = np.diff(np.concatenate(([0.0], times)))
    batch = tuple(batch)
    inc = sample_stable_increment(beta, d, np.broadcast_to(dts, batch + dts.shape), rng)
    return np.cumsum(inc, axis=-2)


def _node_layout(grid: TimeGrid, head_levels: int):
    """Quadrature nodes: cell intervals ``[lo, hi]`` and node times.

    Cell 0 is split dyadically into ``[dt 2^-(j+1), dt 2^-j]`` for
    ``j < head_levels`` plus ``[0, dt 2^-head_levels]``; every other cell
    is a single node at its midpoint.
    """
    dt, n = grid.dt, grid.n_steps
    j = np.arange(head_levels)[::-1]
    head_lo = np.concatenate(([0.0], dt * 0.5 ** (j + 1)))
    head_hi = np.concatenate(([dt * 0.5**head_levels], dt * 0.5**j))
    k = np.arange(1, n)
    lo = np.concatenate((head_lo, k * dt))
    hi = np.concatenate((head_hi, (k + 1) * dt))
    return lo, hi, 0.5 * (lo + hi)


@dataclass
class PathBundle:
    """``p`` independent paths on a common uniform grid.

    Attributes
    ----------
    params : ModelParams
    grid : TimeGrid
    paths : ndarray, shape (p, n_steps + 1, d)
        Values at grid points, starting at the origin.
    node_lo, node_hi, node_times : ndarray, shape (n_nodes,)
        Quadrature cells and the time at which each cell is sampled.
    node_values : ndarray, shape (p, n_nodes, d)
        Path values at ``node_times``. These are exact samples of the
        process, drawn jointly with ``paths``.
    """

    params: ModelParams
    grid: TimeGrid
    paths: np.ndarray
    node_lo: np.ndarray
    node_hi: np.ndarray
    node_times: np.ndarray
    node_values: np.ndarray

    @property
    def p(self) -> int:
        return self.paths.shape[0]

    @classmethod
    def from_function(cls, params: ModelParams, grid: TimeGrid, funcs, head_levels: int = DEFAULT_HEAD_LEVELS):
        """Deterministic bundle from callables ``f_l(times) -> (n, d)``."""
        if callable(funcs):
            funcs = [funcs] * params.p
        lo, hi, mid = _node_layout(grid, head_levels)
        t = grid.times()
        paths = np.stack([np.asarray(f(t), dtype=float).reshape(len(t), params.d) for f in funcs])
        nodes = np.stack([np.asarray(f(mid), dtype=float).reshape(len(mid), params.d) for f in funcs])
        return cls(params, grid, paths, lo, hi, mid, nodes)

    def translated(self, shifts) -> "PathBundle":
        """Bundle with path ``l`` shifted by ``shifts[l]``."""
        s = np.asarray(shifts, dtype=float).reshape(self.p, 1, -1)
        return PathBundle(self.params, self.grid, self.paths + s, self.node_lo,
                          self.node_hi, self.node_times, self.node_values + s)

    def to_csv_rows(self):
        """Rows ``(step, path, x_1..x_d)`` of the grid values."""
        rows = []
        for l in range(self.p):
            for k, x in enumerate(self.paths[l]):
                rows.append([k, l, *map(float, x)])
        return rows


def sample_path_bundle(params: ModelParams, grid: TimeGrid, rng: np.random.Generator,
                       head_levels: int = DEFAULT_HEAD_LEVELS) -> PathBundle:
    """Sample ``p`` independent paths on ``grid`` together with their nodes."""
    lo, hi, mid = _node_layout(grid, head_levels)
    t = grid.times()[1:]
    all_t = np.concatenate((t, mid))
    order = np.argsort(all_t, kind="stable")
    vals = simulate_at_times(params.beta, params.d, all_t[order], rng, batch=(params.p,))
    out = np.empty_like(vals)
    out[:, order] = vals
    n = len(t)
    paths = np.concatenate((np.zeros((params.p, 1, params.d)), out[:, :n]), axis=1)
    return PathBundle(params, grid, paths, lo, hi, mid, out[:, n:])
