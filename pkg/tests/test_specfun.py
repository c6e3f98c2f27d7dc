"""
Tests for log-gamma and the modified Bessel function K_nu
"""
import math

import numpy as np
import pytest
from scipy import special

from core.errors import DomainError
from core.specfun import DEBYE_ORDER, bessel_k, bessel_k_scaled, log_bessel_k, log_bessel_k_scaled, log_gamma
from tests.conftest import bessel_k_quadrature


def test_log_gamma_known_values():
    assert abs(log_gamma(1.0)) < 1e-14
    assert abs(log_gamma(2.0)) < 1e-14
    assert log_gamma(0.5) == pytest.approx(0.5 * math.log(math.pi), rel=1e-12)
    assert log_gamma(11.0) == pytest.approx(math.log(math.factorial(10)), rel=1e-12)


def test_log_gamma_matches_scipy():
    """Relative 1e-12 over [1e-3, 1e4]; absolute near the zeros at 1 and 2"""
    x = np.geomspace(1e-3, 1e4, 400)
    ours = log_gamma(x)
    ref = special.gammaln(x)
    assert np.all(np.abs(ours - ref) <= 1e-12 * np.maximum(1.0, np.abs(ref)))


def test_log_gamma_recurrence():
    x = np.linspace(0.1, 100.0, 500)
    residual = log_gamma(x + 1.0) - log_gamma(x) - np.log(x)
    assert np.max(np.abs(residual)) < 1e-12


@pytest.mark.parametrize("bad", [0.0, -1.0, float('nan')])
def test_log_gamma_domain(bad):
    with pytest.raises(DomainError):
        log_gamma(bad)


def test_log_gamma_scalar_and_array():
    assert isinstance(log_gamma(3.0), float)
    assert log_gamma(np.array([1.0, 2.0, 3.0])).shape == (3,)


def test_bessel_k_examples():
    expected = math.sqrt(math.pi / 2.0) / math.e
    assert bessel_k(0.5, 1.0) == pytest.approx(expected, rel=1e-12)
    assert bessel_k(-0.5, 1.0) == pytest.approx(expected, rel=1e-12)
    assert bessel_k(0.0, 1.0) == pytest.approx(0.42102443824070834, rel=1e-10)


def test_bessel_k_scaled_examples():
    assert bessel_k_scaled(0.5, 1.0) == pytest.approx(math.sqrt(math.pi / 2.0), rel=1e-12)
    assert bessel_k_scaled(0.5, 100.0) == pytest.approx(math.sqrt(math.pi / 200.0), rel=1e-12)
    assert bessel_k_scaled(0.0, 1.0) / math.e == pytest.approx(bessel_k(0.0, 1.0), rel=1e-14)


def test_half_integer_closed_forms():
    x = np.geomspace(1e-3, 30.0, 50)
    base = np.sqrt(np.pi / (2.0 * x)) * np.exp(-x)
    np.testing.assert_allclose(bessel_k(0.5, x), base, rtol=1e-10)
    np.testing.assert_allclose(bessel_k(1.5, x), base * (1.0 + 1.0 / x), rtol=1e-10)
    np.testing.assert_allclose(bessel_k(2.5, x), base * (1.0 + 3.0 / x + 3.0 / x ** 2), rtol=1e-10)


def test_bessel_k_matches_scipy_kv():
    rng = np.random.default_rng(20240611)
    nu = rng.uniform(-50.0, 50.0, 300)
    x = np.exp(rng.uniform(math.log(1e-6), math.log(30.0), 300))
    ref = special.kv(nu, x)
    finite = np.isfinite(ref) & (ref > 0)
    np.testing.assert_allclose(bessel_k(nu[finite], x[finite]), ref[finite], rtol=1e-10)


def test_bessel_k_matches_quadrature():
    rng = np.random.default_rng(7)
    nu = rng.uniform(-10.0, 10.0, 200)
    x = np.exp(rng.uniform(math.log(0.05), math.log(30.0), 200))
    oracle = np.array([bessel_k_quadrature(n, v) for n, v in zip(nu, x)])
    np.testing.assert_allclose(bessel_k_scaled(nu, x), oracle, rtol=1e-9)


def test_symmetry_in_order():
    nu = np.linspace(0.0, 40.0, 81)
    for x in (1e-4, 0.3, 2.0, 25.0):
        a = bessel_k(nu, x)
        b = bessel_k(-nu, x)
        assert np.all(np.abs(a - b) <= 1e-14 * a)


def test_order_recurrence():
    nu = np.linspace(0.0, 20.0, 41) + 0.37
    for x in (1e-3, 0.5, 1.9, 2.1, 10.0, 30.0):
        lhs = bessel_k(nu + 1.0, x)
        rhs = bessel_k(nu - 1.0, x) + (2.0 * nu / x) * bessel_k(nu, x)
        np.testing.assert_allclose(lhs, rhs, rtol=1e-8)


def test_decreasing_in_x():
    x = np.geomspace(1e-4, 50.0, 400)
    for nu in (0.0, 0.3, 1.0, 7.5):
        assert np.all(np.diff(bessel_k(nu, x)) < 0)


def test_regime_switch_is_continuous():
    """Series and continued fraction agree on either side of the switch"""
    for nu in (0.0, 0.25, 3.7):
        left = log_bessel_k(nu, np.nextafter(2.0, 0.0))
        right = log_bessel_k(nu, 2.0)
        assert left == pytest.approx(right, abs=1e-12)


def test_order_switch_is_continuous():
    """Recurrence just below DEBYE_ORDER meets the uniform expansion at it"""
    below = np.nextafter(DEBYE_ORDER, 0.0)
    for x in (1e-3, 0.5, 1.99, 2.0, 5.0, 50.0, 500.0):
        left = log_bessel_k_scaled(below, x)
        right = log_bessel_k_scaled(DEBYE_ORDER, x)
        assert left == pytest.approx(right, abs=1e-11 * max(1.0, abs(right)))


def test_large_orders_match_scipy_kve():
    rng = np.random.default_rng(3)
    nu = rng.uniform(DEBYE_ORDER, 600.0, 400)
    x = np.exp(rng.uniform(math.log(1e-2), math.log(1e4), 400))
    with np.errstate(over='ignore'):
        ref = np.log(special.kve(nu, x))
    ok = np.isfinite(ref)
    assert ok.sum() > 200
    ours = log_bessel_k_scaled(nu[ok], x[ok])
    assert np.all(np.abs(ours - ref[ok]) <= 1e-11 * np.maximum(1.0, np.abs(ref[ok])))


def test_scalar_large_order_over_many_arguments():
    """The EM shape search evaluates one order against every sample"""
    x = np.geomspace(1e-3, 1e3, 5000)
    for nu in (DEBYE_ORDER + 0.5, 99.0, 499.0):
        with np.errstate(over='ignore'):
            ref = np.log(special.kve(nu, x))
        ok = np.isfinite(ref)
        ours = log_bessel_k_scaled(nu, x)
        assert ours.shape == x.shape
        assert np.all(np.isfinite(ours))
        assert np.all(np.abs(ours[ok] - ref[ok]) <= 1e-11 * np.maximum(1.0, np.abs(ref[ok])))


def test_large_order_small_argument_stays_finite():
    """Small-x limit K_nu(x) ~ Gamma(nu)/2 (2/x)^nu"""
    nu, x = 400.0, 1e-3
    value = log_bessel_k(nu, x)
    assert np.isfinite(value)
    asymptotic = special.gammaln(nu) - math.log(2.0) + nu * math.log(2.0 / x)
    assert value == pytest.approx(asymptotic, rel=1e-8)


def test_underflow_is_graceful():
    assert bessel_k(0.5, 800.0) == 0.0
    assert np.isfinite(log_bessel_k(0.5, 800.0))
    assert bessel_k_scaled(0.5, 700.0) == pytest.approx(math.sqrt(math.pi / 1400.0), rel=1e-12)
    assert log_bessel_k_scaled(3.0, 1e5) == pytest.approx(0.5 * math.log(math.pi / 2e5), abs=1e-3)


@pytest.mark.parametrize("nu,x", [(1.0, 0.0), (1.0, -1.0), (float('nan'), 1.0), (float('inf'), 1.0), (0.5, float('nan'))])
def test_bessel_domain(nu, x):
    with pytest.raises(DomainError):
        bessel_k(nu, x)


def test_broadcasting():
    out = bessel_k(np.array([[0.5], [1.5]]), np.array([1.0, 2.0, 3.0]))
    assert out.shape == (2, 3)
    assert out[0, 1] == pytest.approx(math.sqrt(math.pi / 4.0) * math.exp(-2.0), rel=1e-12)
