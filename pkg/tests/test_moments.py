import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from rieszlab.errors import DomainError, OrderTooLarge
from rieszlab.moments import (FrequencyConfig, first_moment_closed_form, fixed_time_bound, moment_fourier,
                              moment_growth_sequence, moment_path_mc, moment_path_mc_orders,
                              permutation_sum, rough_upper_bound, unit_cube_moment_bounds)
from rieszlab.params import riesz_constant, sphere_area, validate_params

# Frozen values from 30-digit radial quadrature of int phi Q^p.
FIRST = [
    ((2.0, 2, 1, 1.0), 1.57079632679489661923),
    ((2.0, 2, 2, 1.0), 0.78539816339744830962),
    ((2.0, 3, 2, 2.0), 0.5),
    ((1.0, 2, 2, 0.5), 0.75082304734031485110),
    ((1.5, 2, 1, 1.0), 2.41839915231229045334),
    ((1.0, 1, 1, 0.5), 2.50662827463100047989),
]


def _quad_oracle(beta, d, p, s):
    mpmath.mp.dps = 20
    f = lambda r: r ** (s - 1) * (1 + r**beta) ** (-p)
    return float(riesz_constant(d, s) * sphere_area(d) * mpmath.quad(f, [0, 1, mpmath.inf]))


@pytest.mark.parametrize("args,expected", FIRST)
def test_first_moment_closed_form(args, expected):
    prm = validate_params(*args)
    assert first_moment_closed_form(prm) == pytest.approx(expected, rel=1e-12)
    assert first_moment_closed_form(prm) == pytest.approx(_quad_oracle(*args), rel=1e-10)


def test_permutation_sum_small_orders():
    prm = validate_params(2.0, 1, 1, 0.5)
    q = lambda lam: 1.0 / (1.0 + np.linalg.norm(lam, axis=-1) ** 2)
    a, b, c = 0.3, -1.2, 0.7
    Q = lambda x: 1 / (1 + x * x)
    assert permutation_sum(None, [[a]], prm) == pytest.approx(Q(a))
    two = Q(a + b) * (Q(a) + Q(b))
    assert permutation_sum(q, [[a], [b]], prm) == pytest.approx(two)
    three = Q(a + b + c) * (Q(a) * Q(a + b) + Q(b) * Q(a + b) + Q(a) * Q(a + c)
                            + Q(c) * Q(a + c) + Q(b) * Q(b + c) + Q(c) * Q(b + c))
    assert permutation_sum(None, [[a], [b], [c]], prm) == pytest.approx(three)


@settings(max_examples=20, deadline=None)
@given(m=st.integers(1, 6))
def test_permutation_sum_constant_q(m):
    prm = validate_params(2.0, 2, 1, 1.0)
    lam = np.ones((m, 2))
    assert permutation_sum(lambda x: np.ones(x.shape[:-1]), lam, prm) == pytest.approx(math.factorial(m))


def test_permutation_sum_symmetric():
    prm = validate_params(2.0, 2, 1, 1.0)
    lam = np.random.default_rng(0).normal(size=(4, 2))
    assert permutation_sum(None, lam[::-1], prm) == pytest.approx(permutation_sum(None, lam, prm))


def test_order_limits():
    prm = validate_params(2.0, 2, 1, 1.0)
    with pytest.raises(OrderTooLarge):
        moment_fourier(FrequencyConfig(9, prm, n_samples=10))
    with pytest.raises(DomainError):
        moment_fourier(FrequencyConfig(0, prm, n_samples=10))


@pytest.mark.parametrize("args,expected", FIRST[:5])
def test_fourier_first_moment(args, expected):
    est = moment_fourier(FrequencyConfig(1, validate_params(*args), n_samples=100_000), seed=3)
    assert abs(est.value - expected) <= 3 * est.std_error


# Frozen 2-d adaptive quadrature of the m = 2 frequency integral, d = 1.
@pytest.mark.parametrize("p,expected", [(1, 5.467891733420277), (2, 6.17387657587343)])
def test_fourier_second_moment_line(p, expected):
    est = moment_fourier(FrequencyConfig(2, validate_params(2.0, 1, p, 0.5), n_samples=200_000), seed=4)
    assert abs(est.value - expected) <= 3 * est.std_error


def test_fourier_shifted_first_moment():
    # z = e1: C 2 pi int_0^inf J0(r) / (1 + r^2) dr = (pi/2)(I0(1) - L0(1))
    prm = validate_params(2.0, 2, 1, 1.0)
    est = moment_fourier(FrequencyConfig(1, prm, n_samples=200_000), z=[1.0, 0.0], seed=5)
    assert abs(est.value - 0.8730842426508675) <= 3 * est.std_error
    assert est.value < math.pi / 2
    im = est.diagnostics
    assert abs(im["imag_mean"]) <= 3 * im["imag_std_error"]
    assert est.diagnostics["ess_fraction"] > 0.01


def test_fourier_deterministic_and_threads():
    cfg = FrequencyConfig(2, validate_params(2.0, 2, 1, 1.0), n_samples=70_000)
    a = moment_fourier(cfg, seed=9)
    b = moment_fourier(cfg, seed=9, threads=3)
    assert a.value == b.value and a.std_error == b.std_error


@pytest.mark.parametrize("m", [1, 2, 3])
def test_rough_bound(m):
    prm = validate_params(2.0, 2, 1, 1.0)
    est = moment_fourier(FrequencyConfig(m, prm, n_samples=100_000), seed=6)
    assert est.value <= rough_upper_bound(prm, m) + 3 * est.std_error


def test_growth_sequence_trend():
    prm = validate_params(2.0, 2, 1, 1.0)
    ms = [moment_fourier(FrequencyConfig(m, prm, n_samples=100_000), seed=7).value for m in (1, 2, 3)]
    a = moment_growth_sequence(prm, ms)
    assert a[0] == pytest.approx(math.log(math.pi / 2), rel=0.02)
    assert a[0] > a[1] > a[2] > 0.0


def test_unit_cube_bounds():
    one = validate_params(2.0, 2, 1, 1.0)
    lo, hi = unit_cube_moment_bounds(one, 3, 2.0)
    # p = 1: exact Gamma factor
    assert lo == pytest.approx(hi) and hi == pytest.approx(math.gamma(1 + 1.5) * 2.0)
    two = validate_params(2.0, 2, 2, 1.0)
    lo, hi = unit_cube_moment_bounds(two, 2, 1.0)
    assert lo < hi
    assert fixed_time_bound(two, 2, [4.0, 1.0], 1.0) == pytest.approx(4.0 ** 1.5)


@pytest.mark.parametrize("args", [(2.0, 2, 1, 1.0), (1.5, 2, 1, 1.0), (2.0, 2, 2, 1.0)])
def test_path_mc_first_moment(args):
    prm = validate_params(*args)
    est = moment_path_mc(prm, 1, 3000, 512, seed=2)
    assert abs(est.value - first_moment_closed_form(prm)) <= 3 * est.std_error
    assert est.method == "path-MC"


def test_path_mc_orders_share_samples():
    prm = validate_params(2.0, 2, 1, 1.0)
    r = moment_path_mc_orders(prm, [1, 2], 200, 64, seed=1)
    single = moment_path_mc(prm, 2, 200, 64, seed=1)
    assert r[2].value == single.value
    assert r[1].to_row()["m"] == 1


def _enumerate_orders(items):
    # insertion-based enumerator, independent of itertools
    if len(items) <= 1:
        return [list(items)]
    out = []
    for rest in _enumerate_orders(items[1:]):
        for i in range(len(rest) + 1):
            out.append(rest[:i] + [items[0]] + rest[i:])
    return out


def test_permutation_listed_examples():
    prm = validate_params(2.0, 2, 1, 1.0)
    assert permutation_sum(None, [[1.0, 0.0]], prm) == pytest.approx(0.5)
    assert permutation_sum(None, [[1.0, 0.0], [0.0, 1.0]], prm) == pytest.approx(1 / 3)


@pytest.mark.parametrize("seed", range(3))
def test_permutation_independent_enumerator(seed):
    prm = validate_params(1.5, 2, 1, 1.0)
    lam = np.random.default_rng(seed).normal(size=(3, 2))
    Q = lambda x: 1 / (1 + np.linalg.norm(x) ** 1.5)
    ref = 0.0
    for order in _enumerate_orders([0, 1, 2]):
        prefix, prod = np.zeros(2), 1.0
        for i in order:
            prefix = prefix + lam[i]
            prod *= Q(prefix)
        ref += prod
    assert len(_enumerate_orders([0, 1, 2])) == 6
    assert permutation_sum(None, lam, prm) == pytest.approx(ref, rel=1e-13)


def test_rough_bound_values():
    prm = validate_params(2.0, 2, 1, 1.0)
    assert rough_upper_bound(prm, 1) == pytest.approx(first_moment_closed_form(prm))
    assert rough_upper_bound(prm, 2) == pytest.approx(2 * (math.pi / 2) ** 2)
    assert rough_upper_bound(prm, 3) == pytest.approx(6 * (math.pi / 2) ** 3)


def test_jensen_monotonicity():
    prm = validate_params(2.0, 2, 1, 1.0)
    r = moment_path_mc_orders(prm, [1, 2], 2000, 256, seed=8)
    m1, m2 = r[1], r[2]
    pooled = math.hypot(m2.std_error, 2 * m1.value * m1.std_error)
    assert m2.value >= m1.value**2 - 3 * pooled
