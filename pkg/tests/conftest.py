"""
Shared fixtures: quadrature oracles, reference mixtures and grid files
"""
import math

import numpy as np
import pytest
from scipy.integrate import quad

from seafloor.models import ImageGrid, Quantity, RKMixture
from storage import grid_files


def bessel_k_quadrature(nu: float, x: float) -> float:
    """e^x K_nu(x) = int_0^inf exp(-x (cosh t - 1)) cosh(nu t) dt"""
    nu = abs(nu)
    upper = 1.0
    while x * (math.cosh(upper) - 1.0) - nu * upper < 60.0:
        upper *= 1.5

    def integrand(t):
        return math.exp(-x * (math.cosh(t) - 1.0)) * math.cosh(nu * t)

    value, _ = quad(integrand, 0.0, upper, epsabs=0.0, epsrel=1e-13, limit=500)
    return value


def integrate_amplitude(log_pdf, a_min: float, a_max: float, power: int = 0) -> float:
    """int a^power p(a) da over [a_min, a_max], integrated in s = ln a"""

    def integrand(s):
        a = math.exp(s)
        return math.exp(log_pdf(a) + (power + 1) * s)

    lo, hi = math.log(a_min), math.log(a_max)
    value, _ = quad(integrand, lo, hi, epsabs=1e-14, epsrel=1e-12, limit=1000,
                    points=[0.5 * (lo + hi), 0.0] if lo < 0.0 < hi else None)
    return value


def k_support(sigma: float, alpha: float):
    """Amplitude range holding all but ~e^-60 of a K density's mass"""
    lam = sigma / alpha
    return math.sqrt(lam) * math.exp(-30.0 / alpha), 40.0 * math.sqrt(lam) + 10.0 * math.sqrt(sigma)


@pytest.fixture
def two_component():
    """Rayleigh background with one heavy-tailed K component"""
    return RKMixture.from_arrays([0.7, 0.3], 1.0, [20.0], [0.8])


@pytest.fixture
def three_component():
    return RKMixture.from_arrays([0.5, 0.3, 0.2], 1.0, [30.0, 1000.0], [5.0, 1.0])


@pytest.fixture
def write_grid(tmp_path):
    """Write values as a grid under tmp_path and return the payload path"""

    def _write(values, quantity=Quantity.INTENSITY, name="grid"):
        grid = ImageGrid(np.asarray(values, dtype=np.float32).astype(float), quantity)
        return grid_files.write_grid(grid, tmp_path / name)

    return _write
