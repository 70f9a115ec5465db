import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from rieszlab.errors import AdmissibilityError, ConfigError, DomainError, RangeError
from rieszlab.params import (ModelParams, RieszKernel, km_transfer, ldp_rate_constant,
                             riesz_constant, scaling_exponent, sphere_area, validate_params)


def _c_oracle(d, s):
    mpmath.mp.dps = 30
    d, s = mpmath.mpf(d), mpmath.mpf(s)
    return float(mpmath.pi ** (-d / 2) * 2 ** (-s) * mpmath.gamma((d - s) / 2) / mpmath.gamma(s / 2))


# Frozen values computed with 30-digit arithmetic.
@pytest.mark.parametrize("d,sigma,expected", [
    (3, 2.0, 0.0795774715459476678844),
    (2, 1.0, 0.1591549430918953357689),
    (5, 0.7, 0.0148292568632170517024),
])
def test_riesz_constant_frozen(d, sigma, expected):
    assert riesz_constant(d, sigma) == pytest.approx(expected, rel=1e-13)


@settings(max_examples=60, deadline=None)
@given(d=st.integers(1, 12), frac=st.floats(0.01, 0.99))
def test_riesz_constant_matches_gamma_oracle(d, frac):
    s = frac * d
    assert riesz_constant(d, s) == pytest.approx(_c_oracle(d, s), rel=1e-11)


def test_riesz_constant_domain():
    with pytest.raises(DomainError):
        riesz_constant(2, 2.0)


def test_riesz_kernel_three_dim_coulomb():
    # C_{3,2} |lam|^-1 = 1/(4 pi |lam|)
    k = RieszKernel.build(3, 2.0)
    lam = np.array([[0.0, 3.0, 4.0]])
    assert k(lam)[0] == pytest.approx(1 / (4 * math.pi * 5), rel=1e-14)


@pytest.mark.parametrize("d,area", [(1, 2.0), (2, 2 * math.pi), (3, 4 * math.pi)])
def test_sphere_area(d, area):
    assert sphere_area(d) == pytest.approx(area, rel=1e-14)


def test_default_z_is_origin():
    prm = validate_params(2.0, 3, 1, 1.0)
    assert prm.z == (0.0, 0.0, 0.0)
    assert ModelParams(2.0, 2, 1, 1.0).z == (0.0, 0.0)


def test_record_roundtrip():
    prm = validate_params(1.5, 2, 2, 1.2, [0.5, -1.0])
    assert ModelParams.from_record(prm.to_record()) == prm


@pytest.mark.parametrize("args,exc", [
    ((2.5, 2, 1, 1.0), RangeError),
    ((0.0, 2, 1, 1.0), RangeError),
    ((2.0, 0, 1, 1.0), RangeError),
    ((2.0, 2, 1.5, 1.0), RangeError),
    ((2.0, 2, True, 1.0), RangeError),
    ((2.0, 2, 1, float("nan")), RangeError),
    ((2.0, 2, 1, 2.0), AdmissibilityError),
    ((1.0, 3, 1, 1.0), AdmissibilityError),
    ((2.0, 2, 1, -0.1), AdmissibilityError),
])
def test_invalid_params(args, exc):
    with pytest.raises(exc):
        validate_params(*args)
    with pytest.raises(ConfigError):
        validate_params(*args)


def test_wrong_z_length():
    with pytest.raises(RangeError):
        validate_params(2.0, 2, 1, 1.0, [0.0])


@settings(max_examples=200, deadline=None)
@given(beta=st.floats(0.05, 2.0), d=st.integers(1, 6), p=st.integers(1, 4), sigma=st.floats(0.001, 12.0))
def test_admissibility_fuzz(beta, d, p, sigma):
    ok = 0 < sigma < min(p * beta, d)
    if ok:
        assert validate_params(beta, d, p, sigma).sigma == sigma
    else:
        with pytest.raises(AdmissibilityError):
            validate_params(beta, d, p, sigma)


def test_ldp_rate_benchmark():
    # beta=2, p=1, sigma=1, rho=1: (1/2) (1/2)^1 = 1/4
    rc = ldp_rate_constant(validate_params(2.0, 2, 1, 1.0), 1.0)
    assert rc.ldp_rate == pytest.approx(0.25, rel=1e-15)
    assert rc.moment_growth_log == pytest.approx(0.5 * math.log(2.0), rel=1e-15)
    assert rc.scaling_exponent == pytest.approx(0.5)


def test_km_transfer_unit():
    assert km_transfer(1.0, 0.0) == -1.0
    with pytest.raises(DomainError):
        km_transfer(0.0, 1.0)


def test_ldp_rate_rejects_bad_rho():
    with pytest.raises(DomainError):
        ldp_rate_constant(validate_params(2.0, 2, 1, 1.0), 0.0)


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_km_transfer_chain(seed):
    rng = np.random.default_rng(seed)
    beta = rng.uniform(0.3, 2.0)
    d = int(rng.integers(1, 5))
    p = int(rng.integers(1, 4))
    sigma = rng.uniform(0.05, 0.95) * min(p * beta, d)
    prm = validate_params(beta, d, p, sigma)
    rho = float(np.exp(rng.normal()))
    rc = ldp_rate_constant(prm, rho)
    assert km_transfer(sigma / beta, rc.moment_growth_log) == pytest.approx(-rc.ldp_rate, rel=1e-12)


@pytest.mark.parametrize("beta,p,sigma,rho", [(2.0, 1, 1.0, 1.0), (1.5, 2, 1.2, 0.3), (1.0, 3, 0.5, 2.0)])
def test_lil_constant_is_inverse_rate_power(beta, p, sigma, rho):
    # lil = (ldp_rate)^(-sigma/beta) for the same rho
    rc = ldp_rate_constant(validate_params(beta, 4, p, sigma), rho)
    assert rc.lil_constant == pytest.approx(rc.ldp_rate ** (-sigma / beta), rel=1e-12)


def test_scaling_exponent():
    a, b = scaling_exponent(validate_params(1.5, 2, 2, 1.0))
    assert a == pytest.approx(2 - 1 / 1.5)
    assert b == pytest.approx(1 / 1.5)


def test_listed_admissibility_cases():
    assert validate_params(2.0, 2, 1, 1.0).sigma == 1.0
    with pytest.raises(AdmissibilityError):
        validate_params(1.0, 3, 2, 2.5)
    with pytest.raises(RangeError):
        validate_params(2.5, 2, 1, 1.0)


@pytest.mark.parametrize("args,expected", [((2.0, 2, 1, 1.0), (0.5, 0.5)), ((2.0, 2, 2, 1.0), (1.5, 0.5)),
                                           ((1.0, 2, 2, 1.0), (1.0, 1.0))])
def test_scaling_exponent_table(args, expected):
    assert scaling_exponent(validate_params(*args)) == pytest.approx(expected)


def test_km_transfer_negative_theta():
    with pytest.raises(DomainError):
        km_transfer(-1.0, 0.3)
