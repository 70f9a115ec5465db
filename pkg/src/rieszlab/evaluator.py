"""Quadrature of the Riesz functional of an additive path field.

``zeta^z(box) = int_box |X_1(s_1) + ... + X_p(s_p) - z|^-sigma ds``
is evaluated by a tensor midpoint rule over the quadrature nodes of a
:class:`~rieszlab.sampler.PathBundle`, with an optional regularized
kernel ``(|x|^2 + eps^2)^(-sigma/2)`` and extrapolation ``eps -> 0``.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Dict, Tuple

import numpy as np

from .errors import BoxTooLarge, DomainError, NonFinite
from .params import ModelParams
from .sampler import PathBundle

__all__ = [
    "BoxSpec",
    "ZetaValue",
    "OccupationHistogram",
    "evaluate_zeta",
    "evaluate_zeta_extrapolated",
    "evaluate_zeta_sup",
    "occupation_histogram",
    "occupation_zeta_extrapolated",
    "extrapolation_weights",
    "bias_exponents",
    "step_scale",
    "node_weights",
    "field_points",
    "kernel_sums",
    "ball_average",
]

EPS_RATIOS = (1.0, 0.5, 0.25)
_CHUNK = 1 << 21


@dataclass(frozen=True)
class BoxSpec:
    """Time box ``[0, t_1] x ... x [0, t_p]``."""

    t: Tuple[float, ...]
    exponential_flag: bool = False

    def __post_init__(self):
        t = tuple(float(v) for v in np.ravel(self.t))
        if any(not (v >= 0 and math.isfinite(v)) for v in t):
            raise DomainError(f"box edges must be nonnegative, got {t}")
        object.__setattr__(self, "t", t)

    @classmethod
    def cube(cls, t: float, p: int) -> "BoxSpec":
        return cls((float(t),) * p)

    @property
    def volume(self) -> float:
        return float(np.prod(self.t))


@dataclass(frozen=True)
class ZetaValue:
    """One evaluation of the functional."""

    value: float
    params: ModelParams
    box: BoxSpec
    z: Tuple[float, ...]
    method: str
    eps: float
    n_steps: int

    def to_record(self, seed=None) -> dict:
        return {
            "seed": seed,
            "params": self.params.to_record(),
            "box": list(self.box.t),
            "z": list(self.z),
            "method": self.method,
            "eps": self.eps,
            "n_steps": self.n_steps,
            "value": self.value,
        }


def ball_average(d: int, sigma: float, radius: float) -> float:
    """Mean of ``|x|^-sigma`` over the ball of given radius in R^d."""
    return d / (d - sigma) * radius ** (-sigma)


def step_scale(bundle: PathBundle) -> float:
    """Spatial scale ``dt^(1/beta)`` of one time step."""
    return bundle.grid.dt ** (1.0 / bundle.params.beta)


def node_weights(bundle: PathBundle, box: BoxSpec):
    """Per-coordinate node indices and time weights clipped to the box."""
    p = bundle.p
    if len(box.t) != p:
        raise DomainError(f"box needs {p} edges, got {len(box.t)}")
    out = []
    for t in box.t:
        if t > bundle.grid.horizon * (1 + 1e-12):
            raise BoxTooLarge(f"box edge {t} exceeds horizon {bundle.grid.horizon}")
        w = np.clip(np.minimum(bundle.node_hi, t) - bundle.node_lo, 0.0, None)
        idx = np.flatnonzero(w > 0)
        out.append((idx, w[idx]))
    return out


def field_points(bundle: PathBundle, box: BoxSpec):
    """Flattened field values ``sum_l X_l(s_l)`` and product weights.

    Returns ``(F, W)`` with ``F`` of shape (M, d) and ``W`` of shape (M,).
    """
    parts = node_weights(bundle, box)
    d = bundle.params.d
    F = np.zeros((1, d))
    W = np.ones(1)
    for l, (idx, w) in enumerate(parts):
        x = bundle.node_values[l, idx]
        F = (F[:, None, :] + x[None, :, :]).reshape(-1, d)
        W = (W[:, None] * w[None, :]).reshape(-1)
    return F, W


def kernel_sums(F, W, zs, sigma, eps, zero_value=None):
    """``sum_i W_i (|F_i - z|^2 + eps^2)^(-sigma/2)`` for each z and eps.

    Parameters
    ----------
    F : ndarray (M, d)
    W : ndarray (M,)
    zs : ndarray (nz, d)
    eps : sequence of float
    zero_value : float, optional
        Replacement kernel value where ``F_i = z`` exactly and ``eps = 0``.
        If None such points raise :class:`NonFinite`.

    Returns
    -------
    ndarray (nz, len(eps))
    """
    zs = np.atleast_2d(np.asarray(zs, dtype=float))
    eps = np.atleast_1d(np.asarray(eps, dtype=float))
    out = np.zeros((len(zs), len(eps)))
    if len(W) == 0:
        return out
    per = max(1, _CHUNK // max(1, len(W)))
    for a in range(0, len(zs), per):
        diff = F[None, :, :] - zs[a:a + per, None, :]
        r2 = np.einsum("zmd,zmd->zm", diff, diff)
        for j, e in enumerate(eps):
            if e > 0:
                k = (r2 + e * e) ** (-0.5 * sigma)
            else:
                zero = r2 == 0.0
                if zero.any():
                    if zero_value is None:
                        raise NonFinite("field hits z exactly with eps = 0")
                    r2 = np.where(zero, 1.0, r2)
                    k = np.where(zero, zero_value, r2 ** (-0.5 * sigma))
                else:
                    k = r2 ** (-0.5 * sigma)
            out[a:a + per, j] = np.sum(k * W[None, :], axis=1)
    return out


def evaluate_zeta(bundle: PathBundle, box: BoxSpec, z=None, eps: float = 0.0,
                  fallback: bool = True) -> ZetaValue:
    """Midpoint-rule value of the functional over ``box``.

    With ``eps = 0`` a node where the field equals ``z`` exactly uses the
    mean of ``|x|^-sigma`` over a ball of diameter one step scale, unless
    ``fallback`` is False, in which case :class:`NonFinite` is raised.
    """
    prm = bundle.params
    if eps < 0:
        raise DomainError("eps must be nonnegative")
    zt = prm.z_array if z is None else np.asarray(z, dtype=float).reshape(prm.d)
    F, W = field_points(bundle, box)
    zero = ball_average(prm.d, prm.sigma, 0.5 * step_scale(bundle)) if fallback else None
    v = float(kernel_sums(F, W, zt[None], prm.sigma, [eps], zero)[0, 0])
    return ZetaValue(v, prm, box, tuple(map(float, zt)), "direct-quadrature",
                     float(eps), bundle.grid.n_steps)


def bias_exponents(params: ModelParams):
    """Two leading exponents of the small-eps bias and a log flag."""
    c = sorted([params.d - params.sigma, params.p * params.beta - params.sigma, 2.0])
    if abs(c[0] - c[1]) < 1e-9:
        return c[0], c[0], True
    return c[0], c[1], False


def extrapolation_weights(params: ModelParams) -> np.ndarray:
    """Weights ``c`` with ``sum_j c_j f(eps_j)`` exact for the bias model.

    The regularized first moment has the small-eps expansion
    ``f(0) + A eps^a + B eps^b + ...`` where ``a < b`` are the two
    smallest of ``d - sigma``, ``p beta - sigma`` and ``2``; when the
    two smallest coincide the pair becomes ``eps^a log eps, eps^a``.
    Nodes are ``eps_j = h * (1, 1/2, 1/4)``. The basis is closed under
    rescaling so the weights do not depend on ``h``.
    """
    a, b, log = bias_exponents(params)
    e = np.asarray(EPS_RATIOS)
    second = e**a * np.log(e) if log else e**b
    A = np.vstack([np.ones(3), e**a, second])
    return np.linalg.solve(A, np.array([1.0, 0.0, 0.0]))


def evaluate_zeta_extrapolated(bundle: PathBundle, box: BoxSpec, z=None) -> ZetaValue:
    """Value extrapolated to ``eps = 0`` from ``eps = h, h/2, h/4``."""
    prm = bundle.params
    zt = prm.z_array if z is None else np.asarray(z, dtype=float).reshape(prm.d)
    h = step_scale(bundle)
    F, W = field_points(bundle, box)
    vals = kernel_sums(F, W, zt[None], prm.sigma, h * np.asarray(EPS_RATIOS))[0]
    v = float(extrapolation_weights(prm) @ vals)
    return ZetaValue(v, prm, box, tuple(map(float, zt)), "direct-quadrature-extrapolated",
                     0.0, bundle.grid.n_steps)


@dataclass
class OccupationHistogram:
    """Time-volume of the field accumulated in cubic spatial bins."""

    bin_width: float
    origin: Tuple[float, ...]
    counts: Dict[Tuple[int, ...], float] = field(default_factory=dict)

    @property
    def total_mass(self) -> float:
        return float(np.sum(np.fromiter(self.counts.values(), float)))

    def centers_and_masses(self):
        keys = np.array(list(self.counts.keys()), dtype=float)
        mass = np.fromiter(self.counts.values(), float)
        centers = np.asarray(self.origin) + (keys + 0.5) * self.bin_width
        return centers, mass

    def zeta(self, z, sigma: float) -> float:
        """Riesz potential of the binned measure at ``z``.

        A bin within half a width of ``z`` contributes the ball average of
        the kernel over a ball of the bin's volume.
        """
        c, m = self.centers_and_masses()
        d = c.shape[1]
        r = np.linalg.norm(c - np.asarray(z, dtype=float), axis=1)
        vol_ball = math.pi ** (d / 2) / math.gamma(d / 2 + 1)
        R = (self.bin_width**d / vol_ball) ** (1.0 / d)
        near = r < 0.5 * self.bin_width
        k = np.where(near, ball_average(d, sigma, R), np.where(near, 1.0, r) ** (-sigma))
        return float(np.sum(m * k))


def occupation_histogram(bundle: PathBundle, box: BoxSpec, bin_width: float,
                         origin=None) -> OccupationHistogram:
    """Bin each node's time-volume by the field value at the node."""
    if not bin_width > 0:
        raise DomainError("bin_width must be positive")
    F, W = field_points(bundle, box)
    o = np.zeros(bundle.params.d) if origin is None else np.asarray(origin, dtype=float)
    idx = np.floor((F - o) / bin_width).astype(np.int64)
    keys, inv = np.unique(idx, axis=0, return_inverse=True)
    mass = np.bincount(inv.ravel(), weights=W, minlength=len(keys))
    counts = {tuple(int(v) for v in k): float(m) for k, m in zip(keys, mass)}
    return OccupationHistogram(float(bin_width), tuple(map(float, o)), counts)


def occupation_zeta_extrapolated(bundle: PathBundle, box: BoxSpec, z, bin_width: float) -> float:
    """Histogram route at widths ``w, w/2, w/4`` extrapolated as ``w^2``.

    Bins are centred on lattice points so that mass sitting on a lattice
    line is not displaced by half a bin, which would give an ``O(w)`` bias.
    """
    prm = bundle.params
    ws = [bin_width / 2**j for j in range(3)]
    v = [occupation_histogram(bundle, box, w, origin=np.full(prm.d, -0.5 * w)).zeta(z, prm.sigma)
         for w in ws]
    r1 = (4 * v[1] - v[0]) / 3
    r2 = (4 * v[2] - v[1]) / 3
    return float((16 * r2 - r1) / 15)


def evaluate_zeta_sup(bundle: PathBundle, box: BoxSpec, search_radius: float,
                      coarse_step: float, center=None, eps=None):
    """Coarse-to-fine search for the maximizing shift ``z``.

    A cubic lattice of spacing ``coarse_step`` inside the ball of radius
    ``search_radius`` around ``center`` is scanned, then the best point is
    refined three times on its ``3^d`` neighbourhood with halved step.
    The kernel is regularized with ``eps`` (default one step scale) since
    the discretized field has point singularities.

    Returns
    -------
    z_star : ndarray
    value : ZetaValue
    """
    prm = bundle.params
    if not search_radius > 0 or not coarse_step > 0:
        raise DomainError("search_radius and coarse_step must be positive")
    d = prm.d
    c0 = np.zeros(d) if center is None else np.asarray(center, dtype=float)
    e = step_scale(bundle) if eps is None else float(eps)
    F, W = field_points(bundle, box)
    n = int(math.floor(search_radius / coarse_step))
    ks = np.array(list(itertools.product(range(-n, n + 1), repeat=d)), dtype=float)
    ks = ks[np.linalg.norm(ks, axis=1) * coarse_step <= search_radius * (1 + 1e-12)]
    zs = c0 + coarse_step * ks
    vals = kernel_sums(F, W, zs, prm.sigma, [e])[:, 0]
    best = int(np.argmax(vals))
    zb, vb = zs[best], vals[best]
    nb = np.array(list(itertools.product((-1, 0, 1), repeat=d)), dtype=float)
    step = coarse_step
    for _ in range(3):
        step *= 0.5
        cand = zb + step * nb
        v = kernel_sums(F, W, cand, prm.sigma, [e])[:, 0]
        j = int(np.argmax(v))
        if v[j] > vb:
            zb, vb = cand[j], v[j]
    zv = ZetaValue(float(vb), prm, box, tuple(map(float, zb)), "sup-search", e,
                   bundle.grid.n_steps)
    return zb, zv
