"""Grid quadrature of two Sobolev-type inequalities.

* Convolution form: ``|int prod f_l(x_l) |x_1+...+x_p|^-(d-sigma) dx|``
  against ``prod ||f_l||_q`` with ``q = p d / ((p-1) d + sigma)``.
* Correlation form: ``(int c(lam)^p phi(lam) dlam)^(1/p)`` with
  ``c(lam) = int |f(lam+g)| |g(g)| / sqrt(h(lam+g) h(g)) dg`` and
  ``phi(lam) = C |lam|^-(d-sigma)``, against
  ``||f||_2 ||g||_2 ||1/h||_{p d / sigma}``.

Functions are sampled on a uniform cubic grid; the singular kernel is
averaged over the cells next to the origin. Reusing the same samples
with a doubled spacing realizes an exact dilation.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy import signal

from .errors import DomainError
from .params import riesz_constant

__all__ = [
    "CubeGrid",
    "Bump",
    "TestFunction",
    "random_test_function",
    "convolution_sides",
    "correlation_sides",
    "lebesgue_norm",
]


@dataclass(frozen=True)
class CubeGrid:
    """Cell centres of ``[-half_width, half_width]^d`` with ``n`` cells per side."""

    d: int
    n: int
    half_width: float = 1.0

    @property
    def spacing(self) -> float:
        return 2 * self.half_width / self.n

    def coords(self) -> np.ndarray:
        x = -self.half_width + (np.arange(self.n) + 0.5) * self.spacing
        return np.stack(np.meshgrid(*([x] * self.d), indexing="ij"), axis=-1)

    def refined(self) -> "CubeGrid":
        return CubeGrid(self.d, 2 * self.n, self.half_width)


@dataclass(frozen=True)
class Bump:
    """Indicator ball (``kind='ball'``) or Gaussian cut at three widths."""

    center: tuple
    radius: float
    amplitude: float
    kind: str = "ball"

    def __call__(self, x: np.ndarray) -> np.ndarray:
        r = np.linalg.norm(x - np.asarray(self.center), axis=-1)
        if self.kind == "ball":
            return self.amplitude * (r <= self.radius)
        return self.amplitude * np.exp(-0.5 * (3 * r / self.radius) ** 2) * (r <= self.radius)


@dataclass(frozen=True)
class TestFunction:
    """Finite sum of bumps, hence finitely supported."""

    __test__ = False  # not a pytest class

    bumps: tuple

    def sample(self, grid: CubeGrid) -> np.ndarray:
        x = grid.coords()
        return sum((b(x) for b in self.bumps), np.zeros(x.shape[:-1]))


def random_test_function(rng: np.random.Generator, d: int, half_width: float = 1.0,
                         kinds: Sequence[str] = ("ball", "gauss")) -> TestFunction:
    """One to three bumps with random centre, radius, height and kind."""
    bumps = []
    for _ in range(int(rng.integers(1, 4))):
        rad = float(rng.uniform(0.15, 0.45)) * half_width
        c = tuple(float(v) for v in rng.uniform(-half_width + rad, half_width - rad, size=d))
        kind = str(kinds[int(rng.integers(len(kinds)))])
        bumps.append(Bump(c, rad, float(rng.uniform(0.2, 2.0)), kind))
    return TestFunction(tuple(bumps))


def lebesgue_norm(f: np.ndarray, spacing: float, q: float) -> float:
    d = f.ndim
    return float((np.sum(np.abs(f) ** q) * spacing**d) ** (1.0 / q))


_SUB = 64  # sub-grid points per axis near the singularity


def _kernel(shape, spacing, d, exponent):
    """Cell averages of ``|y|^-exponent`` on the full lag grid.

    Lags sit at ``spacing * (k - (m - 1)/2)``. Cells within 1.5 spacings of
    the origin are averaged over a sub-grid; the rest use the centre value.
    Both scale exactly as ``spacing^-exponent``.
    """
    axes = [(np.arange(m) - 0.5 * (m - 1)) * spacing for m in shape]
    y = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)
    near = np.all(np.abs(y) <= 1.5 * spacing, axis=-1)
    k = np.empty(y.shape[:-1])
    k[~near] = np.linalg.norm(y[~near], axis=-1) ** (-exponent)
    s = _SUB if d <= 2 else _SUB // 4
    u = ((np.arange(s) + 0.5) / s - 0.5) * spacing
    sub = np.stack(np.meshgrid(*([u] * d), indexing="ij"), axis=-1).reshape(-1, d)
    for idx in zip(*np.nonzero(near)):
        k[idx] = np.mean(np.linalg.norm(y[idx] + sub, axis=-1) ** (-exponent))
    return k


def convolution_sides(fs: Sequence[np.ndarray], spacing: float, sigma: float):
    """Return ``(|LHS|, prod ||f_l||_q)`` for the convolution inequality.

    The ``p``-fold convolution is computed with zero padding, so lags
    cover every attainable sum ``x_1 + ... + x_p``.
    """
    fs = [np.asarray(f, dtype=float) for f in fs]
    d = fs[0].ndim
    if not 0 < sigma < d:
        raise DomainError("need 0 < sigma < d")
    p = len(fs)
    conv = fs[0]
    for f in fs[1:]:
        conv = signal.fftconvolve(conv, f, mode="full")
    conv = conv * spacing ** (d * (p - 1))
    K = _kernel(conv.shape, spacing, d, d - sigma)
    lhs = abs(float(np.sum(conv * K) * spacing**d))
    q = p * d / ((p - 1) * d + sigma)
    rhs = float(np.prod([lebesgue_norm(f, spacing, q) for f in fs]))
    return lhs, rhs


def correlation_sides(f: np.ndarray, g: np.ndarray, h: np.ndarray, spacing: float,
                      sigma: float, p: int):
    """Return ``(LHS, ||f||_2 ||g||_2 ||1/h||_{pd/sigma})`` for the correlation form."""
    f, g, h = (np.asarray(a, dtype=float) for a in (f, g, h))
    d = f.ndim
    if np.any(h <= 0):
        raise DomainError("h must be positive on the grid")
    F = np.abs(f) / np.sqrt(h)
    G = np.abs(g) / np.sqrt(h)
    # c(lam) = sum_gamma F(lam + gamma) G(gamma): correlation of F with G.
    flip = tuple(slice(None, None, -1) for _ in range(d))
    c = signal.fftconvolve(F, G[flip], mode="full") * spacing**d
    c = np.clip(c, 0.0, None)
    K = riesz_constant(d, sigma) * _kernel(c.shape, spacing, d, d - sigma)
    lhs = float((np.sum(c**p * K) * spacing**d) ** (1.0 / p))
    rhs = (lebesgue_norm(f, spacing, 2) * lebesgue_norm(g, spacing, 2)
           * lebesgue_norm(1.0 / h, spacing, p * d / sigma))
    return lhs, float(rhs)
