import math

import numpy as np
import pytest
from scipy import integrate

from rieszlab.errors import BoxTooLarge, DomainError, NonFinite
from rieszlab.evaluator import (BoxSpec, ball_average, bias_exponents, evaluate_zeta,
                                evaluate_zeta_extrapolated, evaluate_zeta_sup, extrapolation_weights,
                                occupation_histogram, occupation_zeta_extrapolated)
from rieszlab.params import validate_params
from rieszlab.rng import make_rng
from rieszlab.sampler import PathBundle, TimeGrid, sample_path_bundle

LINE = lambda t: np.stack([t, 0 * t], axis=-1)


def _line_bundle(n, p=1, sigma=1.0):
    prm = validate_params(2.0, 2, p, sigma)
    return PathBundle.from_function(prm, TimeGrid(1.0, n), LINE)


def test_asinh_fixture():
    # int_0^1 (s^2 + 1)^(-1/2) ds = asinh(1) = ln(1 + sqrt 2)
    b = _line_bundle(2**14)
    v = evaluate_zeta(b, BoxSpec.cube(1.0, 1), z=[0.0, -1.0]).value
    assert v == pytest.approx(math.asinh(1.0), abs=1e-9)


def test_refinement_monitor():
    errs = [abs(evaluate_zeta(_line_bundle(n), BoxSpec.cube(1.0, 1), z=[0.0, 1.0]).value - math.asinh(1.0))
            for n in (64, 128, 256)]
    # midpoint rule: second order
    assert errs[0] / errs[1] == pytest.approx(4.0, rel=0.05)
    assert errs[1] / errs[2] == pytest.approx(4.0, rel=0.05)


def test_two_parameter_fixture():
    # X1 = s1 e1, X2 = s2 e2, z = (-1, -1)
    b = _line_bundle(512, p=2)
    b = PathBundle.from_function(b.params, b.grid, [LINE, lambda t: np.stack([0 * t, t], axis=-1)])
    v = evaluate_zeta(b, BoxSpec.cube(1.0, 2), z=[-1.0, -1.0]).value
    ref = integrate.dblquad(lambda y, x: ((x + 1) ** 2 + (y + 1) ** 2) ** -0.5, 0, 1, 0, 1)[0]
    assert v == pytest.approx(ref, rel=1e-5)


def test_zero_box():
    b = _line_bundle(16)
    assert evaluate_zeta(b, BoxSpec.cube(0.0, 1), z=[0.0, 1.0]).value == 0.0


def test_box_validation():
    b = _line_bundle(16)
    with pytest.raises(BoxTooLarge):
        evaluate_zeta(b, BoxSpec.cube(2.0, 1), z=[0.0, 1.0])
    with pytest.raises(DomainError):
        BoxSpec((-1.0,))
    with pytest.raises(DomainError):
        evaluate_zeta(b, BoxSpec.cube(1.0, 2))
    with pytest.raises(DomainError):
        evaluate_zeta(b, BoxSpec.cube(1.0, 1), eps=-1.0)


def test_exact_hit():
    prm = validate_params(2.0, 2, 1, 1.0)
    b = PathBundle.from_function(prm, TimeGrid(1.0, 8), lambda t: np.zeros((len(t), 2)), head_levels=1)
    with pytest.raises(NonFinite):
        evaluate_zeta(b, BoxSpec.cube(1.0, 1), fallback=False)
    v = evaluate_zeta(b, BoxSpec.cube(1.0, 1)).value
    assert v == pytest.approx(ball_average(2, 1.0, 0.5 * math.sqrt(1 / 8)))


def test_ball_average():
    # mean of |x|^-1 over the unit disk is 2
    assert ball_average(2, 1.0, 1.0) == pytest.approx(2.0)


def test_partial_box_and_regularization_monotone():
    b = _line_bundle(256)
    half = evaluate_zeta(b, BoxSpec.cube(0.5, 1), z=[0.0, 1.0]).value
    assert half == pytest.approx(math.asinh(0.5), abs=1e-5)
    v0 = evaluate_zeta(b, BoxSpec.cube(1.0, 1), z=[0.0, 1.0]).value
    v1 = evaluate_zeta(b, BoxSpec.cube(1.0, 1), z=[0.0, 1.0], eps=0.1).value
    assert v1 < v0


def test_histogram_mass_and_bins():
    prm = validate_params(2.0, 1, 1, 0.5)
    b = PathBundle.from_function(prm, TimeGrid(1.0, 64), lambda t: t[:, None])
    h = occupation_histogram(b, BoxSpec.cube(1.0, 1), 0.25)
    assert h.total_mass == pytest.approx(1.0)
    assert sorted(h.counts) == [(0,), (1,), (2,), (3,)]
    assert all(m == pytest.approx(0.25) for m in h.counts.values())
    with pytest.raises(DomainError):
        occupation_histogram(b, BoxSpec.cube(1.0, 1), 0.0)


def test_histogram_route_agrees():
    # z at distance 1/2 from the midpoint of the segment: 2 asinh(1)
    b = _line_bundle(1024)
    v = occupation_zeta_extrapolated(b, BoxSpec.cube(1.0, 1), [0.5, 0.5], 0.05)
    assert v == pytest.approx(2 * math.asinh(1.0), rel=1e-4)


@pytest.mark.parametrize("beta,d,p,sigma,log", [(2.0, 2, 1, 1.0, True), (2.0, 2, 2, 1.0, False),
                                                 (1.5, 3, 1, 1.0, False)])
def test_extrapolation_weights(beta, d, p, sigma, log):
    prm = validate_params(beta, d, p, sigma)
    w = extrapolation_weights(prm)
    assert w.sum() == pytest.approx(1.0)
    assert bias_exponents(prm)[2] is log


def test_extrapolation_weights_frozen():
    assert np.allclose(extrapolation_weights(validate_params(2.0, 2, 1, 1.0)), [1, -4, 4])
    assert np.allclose(extrapolation_weights(validate_params(2.0, 2, 2, 1.0)), [1 / 3, -2, 8 / 3])


def test_extrapolated_smooth_fixture():
    # off the path the bias is O(eps^2), outside the extrapolation basis,
    # so the result keeps an O(h^2) residual with h = 1/32
    b = _line_bundle(1024)
    v = evaluate_zeta_extrapolated(b, BoxSpec.cube(1.0, 1), z=[0.0, 1.0]).value
    assert v == pytest.approx(math.asinh(1.0), abs=2e-4)


def test_sup_dominates_and_fixture_maximizer():
    b = _line_bundle(256)
    box = BoxSpec.cube(1.0, 1)
    z, sv = evaluate_zeta_sup(b, box, search_radius=1.0, coarse_step=0.1)
    assert abs(z[1]) < 0.05 and -0.05 < z[0] < 1.05
    for zz in ([0.0, 0.0], [0.5, 0.3], [1.0, -0.2]):
        assert sv.value >= evaluate_zeta(b, box, z=zz, eps=sv.eps).value
    with pytest.raises(DomainError):
        evaluate_zeta_sup(b, box, 0.0, 0.1)


def test_translation_shift():
    prm = validate_params(1.5, 2, 2, 1.0)
    b = sample_path_bundle(prm, TimeGrid(1.0, 32), make_rng(3, 11), head_levels=3)
    a = np.array([[0.3, -0.2], [0.1, 0.4]])
    box = BoxSpec.cube(1.0, 2)
    z = np.array([0.2, 0.1])
    v0 = evaluate_zeta(b, box, z=z, eps=0.01).value
    v1 = evaluate_zeta(b.translated(a), box, z=z + a.sum(0), eps=0.01).value
    assert v1 == pytest.approx(v0, rel=1e-12)


def test_record_fields():
    b = _line_bundle(8)
    rec = evaluate_zeta(b, BoxSpec.cube(1.0, 1), z=[0.0, 1.0]).to_record(seed=3)
    assert rec["seed"] == 3 and rec["method"] == "direct-quadrature" and rec["box"] == [1.0]


def test_histogram_total_mass_two_parameter():
    prm = validate_params(1.5, 2, 2, 1.0)
    b = sample_path_bundle(prm, TimeGrid(1.0, 16), make_rng(4, 11), head_levels=2)
    h = occupation_histogram(b, BoxSpec((0.75, 0.5)), 0.1)
    assert h.total_mass == pytest.approx(0.375)


def test_sup_translation_invariance():
    prm = validate_params(2.0, 2, 1, 1.0)
    b = sample_path_bundle(prm, TimeGrid(1.0, 32), make_rng(5, 11), head_levels=2)
    v = np.array([0.7, -0.4])
    box = BoxSpec.cube(1.0, 1)
    z0, s0 = evaluate_zeta_sup(b, box, 1.0, 0.125)
    z1, s1 = evaluate_zeta_sup(b.translated([v]), box, 1.0, 0.125, center=v)
    assert np.allclose(z1, z0 + v) and s1.value == pytest.approx(s0.value, rel=1e-12)
