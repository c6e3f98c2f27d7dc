"""
Rayleigh and K amplitude distributions

Rayleigh:  p_R(a | lambda0) = (2a / lambda0) exp(-a^2 / lambda0)
K:         p_K(a | sigma, alpha) = 4 / (sqrt(lam) Gamma(alpha)) (a / sqrt(lam))^alpha
                                   K_{alpha-1}(2a / sqrt(lam)),  lam = sigma / alpha

The K density and exceedance function are only ever evaluated in the log
domain through the scaled Bessel function.
"""
import logging
import math
from typing import Union

import numpy as np

from core.errors import DomainError
from core.specfun import log_bessel_k, log_gamma
from seafloor.models import AmplitudePopulation, KParams, RayleighParams

logger = logging.getLogger(__name__)

ArrayLike = Union[float, np.ndarray]

LOG_ZERO = -np.inf
_LN2 = math.log(2.0)
_LN4 = math.log(4.0)


def make_rng(seed: int, stream: int = 0) -> np.random.Generator:
    """PCG64 generator; (seed, stream) pairs give independent reproducible streams"""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(entropy=int(seed), spawn_key=(int(stream),))))


def _amplitudes(a: ArrayLike, strict: bool) -> np.ndarray:
    arr = np.asarray(a, dtype=float)
    if np.any(np.isnan(arr)):
        raise DomainError("Amplitude is NaN")
    if strict and np.any(arr <= 0):
        raise DomainError("Amplitude must be > 0 for the K density")
    if np.any(arr < 0):
        raise DomainError("Amplitude must be >= 0")
    return arr


def _out(result: np.ndarray, a: ArrayLike) -> ArrayLike:
    return float(result) if np.ndim(a) == 0 else result


def rayleigh_log_pdf(a: ArrayLike, p: RayleighParams) -> ArrayLike:
    """ln p_R(a); LOG_ZERO at a = 0"""
    arr = _amplitudes(a, strict=False)
    with np.errstate(divide='ignore'):
        out = _LN2 + np.log(arr) - math.log(p.lambda0) - arr * arr / p.lambda0
    return _out(out, a)


def rayleigh_pdf(a: ArrayLike, p: RayleighParams) -> ArrayLike:
    return _out(np.exp(np.asarray(rayleigh_log_pdf(a, p))), a)


def rayleigh_pfa(a: ArrayLike, p: RayleighParams) -> ArrayLike:
    """P(A > a) = exp(-a^2 / lambda0)"""
    arr = _amplitudes(a, strict=False)
    return _out(np.exp(-arr * arr / p.lambda0), a)


def _k_log_pdf(arr: np.ndarray, p: KParams) -> np.ndarray:
    """Unchecked log density for a > 0"""
    lam = p.scale
    root = math.sqrt(lam)
    u = arr / root
    return (_LN4 - math.log(root) - log_gamma(p.alpha)
            + p.alpha * np.log(u) + log_bessel_k(p.alpha - 1.0, 2.0 * u))


def k_log_pdf(a: ArrayLike, p: KParams) -> ArrayLike:
    """ln p_K(a) for a > 0"""
    arr = _amplitudes(a, strict=True)
    return _out(_k_log_pdf(arr, p), a)


def k_pdf(a: ArrayLike, p: KParams) -> ArrayLike:
    """exp of k_log_pdf; underflows to 0 in the far tail"""
    return _out(np.exp(np.asarray(k_log_pdf(a, p))), a)


def k_log_pfa(a: ArrayLike, p: KParams) -> ArrayLike:
    """ln P(A > a) = ln[(2/Gamma(alpha)) u^alpha K_alpha(2u)], u = a/sqrt(lam); 0 at a = 0"""
    arr = _amplitudes(a, strict=False)
    out = np.zeros_like(arr)
    pos = arr > 0
    if np.any(pos):
        u = arr[pos] / math.sqrt(p.scale)
        out[pos] = _LN2 - log_gamma(p.alpha) + p.alpha * np.log(u) + log_bessel_k(p.alpha, 2.0 * u)
    return _out(np.minimum(out, 0.0), a)


def k_pfa(a: ArrayLike, p: KParams) -> ArrayLike:
    """P(A > a) for the K distribution, clamped to [0, 1]"""
    log_pfa = np.asarray(k_log_pfa(a, p))
    return _out(np.clip(np.exp(log_pfa), 0.0, 1.0), a)


def rayleigh_sample(p: RayleighParams, n: int, seed: int, stream: int = 0) -> AmplitudePopulation:
    """a = sqrt(-lambda0 ln u), u uniform on (0, 1]"""
    if n < 1:
        raise DomainError(f"Sample count must be >= 1, got {n}")
    rng = make_rng(seed, stream)
    return AmplitudePopulation(draw_rayleigh(rng, p.lambda0, n))


def draw_rayleigh(rng: np.random.Generator, mean_square, n: int) -> np.ndarray:
    u = 1.0 - rng.random(n)
    return np.sqrt(-mean_square * np.log(u))


def draw_k(rng: np.random.Generator, p: KParams, n: int) -> np.ndarray:
    # Rayleigh speckle whose mean-square is Gamma(alpha, lam) distributed
    s = rng.gamma(shape=p.alpha, scale=p.scale, size=n)
    return draw_rayleigh(rng, s, n)


def k_sample(p: KParams, n: int, seed: int, stream: int = 0) -> AmplitudePopulation:
    """K amplitudes via the compound Gamma-Rayleigh representation"""
    if n < 1:
        raise DomainError(f"Sample count must be >= 1, got {n}")
    rng = make_rng(seed, stream)
    return AmplitudePopulation(draw_k(rng, p, n))


def k_intensity_variance(p: KParams) -> float:
    """Var[I] = lam^2 alpha (alpha + 2), so Var/E^2 = 1 + 2/alpha"""
    return p.scale ** 2 * p.alpha * (p.alpha + 2.0)
