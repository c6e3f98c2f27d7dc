"""
Rayleigh + K Mixture Model
Evaluation, responsibilities, generalized-EM fitting, sampling and segmentation

Component 0 is always the Rayleigh term. Internally the fit works on flat
arrays (weights, lambda0, sigmas, alphas); the returned RKMixture is in
canonical order with K components sorted by ascending sigma.
"""
import logging
import math
import warnings
from dataclasses import dataclass
from typing import List, Optional, Tuple, Union

import numpy as np
from scipy.optimize import minimize_scalar
from scipy.special import logsumexp

from config import config
from core.distributions import (
    LOG_ZERO, draw_k, draw_rayleigh, k_log_pdf, k_pfa, make_rng, rayleigh_log_pdf, rayleigh_pfa,
)
from core.errors import DegenerateComponentWarning, DomainError, InsufficientData, NonFiniteLikelihood
from seafloor.models import AmplitudePopulation, EmConfig, FitResult, KParams, RayleighParams, RKMixture

logger = logging.getLogger(__name__)

ArrayLike = Union[float, np.ndarray]

# Samples whose responsibility is below this do not enter a K shape search
RESPONSIBILITY_CUTOFF = 1e-12
_SHAPE_XATOL = 1e-5


def _amplitudes(data) -> np.ndarray:
    arr = np.asarray(data, dtype=float).ravel()
    if np.any(np.isnan(arr)) or np.any(arr < 0):
        raise DomainError("Amplitudes must be >= 0 and not NaN")
    return arr


@dataclass(frozen=True)
class _State:
    """Unsorted working parameters of a fit"""
    weights: np.ndarray
    lambda0: float
    sigmas: np.ndarray
    alphas: np.ndarray

    @property
    def M(self) -> int:
        return self.weights.size

    @classmethod
    def from_mixture(cls, theta: RKMixture) -> '_State':
        return cls(
            weights=theta.weights,
            lambda0=theta.rayleigh.lambda0,
            sigmas=np.array([c.params.sigma for c in theta.components], dtype=float),
            alphas=np.array([c.params.alpha for c in theta.components], dtype=float),
        )

    def k_params(self, j: int) -> KParams:
        return KParams(float(self.sigmas[j]), float(self.alphas[j]))

    def to_mixture(self) -> RKMixture:
        return RKMixture.from_arrays(self.weights, self.lambda0, self.sigmas, self.alphas)

    def canonical_index(self) -> np.ndarray:
        """Map from working component index to canonical (sigma-sorted) index"""
        order = np.argsort(self.sigmas, kind='stable')
        mapping = np.zeros(self.M, dtype=int)
        mapping[1 + order] = 1 + np.arange(order.size)
        return mapping


def _log_densities(a: np.ndarray, state: _State) -> np.ndarray:
    """N x M matrix of ln(w_j p_j(a_n)); K columns are LOG_ZERO at a = 0"""
    out = np.empty((a.size, state.M))
    log_w = np.log(state.weights)
    out[:, 0] = log_w[0] + rayleigh_log_pdf(a, RayleighParams(state.lambda0))
    pos = a > 0
    for j in range(state.M - 1):
        col = np.full(a.size, LOG_ZERO)
        if np.any(pos):
            col[pos] = log_w[j + 1] + k_log_pdf(a[pos], state.k_params(j))
        out[:, j + 1] = col
    return out


def component_log_densities(data, theta: RKMixture) -> np.ndarray:
    """Weighted component log densities ln(w_j p_j(a_n)), shape N x M"""
    return _log_densities(_amplitudes(data), _State.from_mixture(theta))


def _row_lse(log_dens: np.ndarray) -> np.ndarray:
    with np.errstate(divide='ignore', invalid='ignore'):
        return logsumexp(log_dens, axis=1)


def mixture_log_pdf(a: ArrayLike, theta: RKMixture) -> ArrayLike:
    """ln p(a | theta) by log-sum-exp over the weighted components"""
    out = _row_lse(component_log_densities(a, theta))
    return float(out[0]) if np.ndim(a) == 0 else out.reshape(np.shape(a))


def mixture_pdf(a: ArrayLike, theta: RKMixture) -> ArrayLike:
    out = np.exp(np.asarray(mixture_log_pdf(a, theta)))
    return float(out) if np.ndim(a) == 0 else out


def mixture_pfa(a: ArrayLike, theta: RKMixture) -> ArrayLike:
    """sum_j w_j PFA_j(a), in [0, 1]; 1 at a = 0"""
    arr = np.asarray(a, dtype=float)
    total = theta.w0 * np.asarray(rayleigh_pfa(arr, theta.rayleigh))
    for comp in theta.components:
        total = total + comp.weight * np.asarray(k_pfa(arr, comp.params))
    total = np.clip(total, 0.0, 1.0)
    return float(total) if np.ndim(a) == 0 else total


def _normalize_rows(log_dens: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Responsibilities, row log-normalizers and the degenerate-row mask"""
    lse = _row_lse(log_dens)
    degenerate = ~np.isfinite(lse)
    r = np.empty_like(log_dens)
    ok = ~degenerate
    r[ok] = np.exp(log_dens[ok] - lse[ok, None])
    r[degenerate] = 1.0 / log_dens.shape[1]
    return r, lse, degenerate


def responsibilities(data, theta: RKMixture, return_degenerate: bool = False):
    """
    Posterior component probabilities r[n, j]

    Rows where every component has zero density are set to 1/M and flagged;
    pass return_degenerate=True to get the flag mask as well.
    """
    r, _, degenerate = _normalize_rows(component_log_densities(data, theta))
    if np.any(degenerate):
        logger.warning(f"{int(degenerate.sum())} samples have zero density under every component")
    if return_degenerate:
        return r, degenerate
    return r


class GeneralizedEM:
    """
    Generalized EM for Rayleigh + K mixtures

    The Rayleigh scale and the weights have closed-form updates. Each K
    component gets sigma from the weighted mean intensity and alpha from a
    bounded 1-D search on ln(alpha); an update is kept only if it does not
    lower the component's weighted log-likelihood.
    """

    def __init__(self, em_config: Optional[EmConfig] = None):
        self.config = em_config or EmConfig()

    # ------------------------------------------------------------------
    # public entry
    # ------------------------------------------------------------------

    def fit(self, data, M: int, convention: str = config.K_CONVENTION) -> FitResult:
        from core.selection import param_count

        a = _amplitudes(data)
        if M < 1:
            raise DomainError(f"M must be >= 1, got {M}")
        if np.any(a <= 0):
            raise DomainError("Fit data must be strictly positive; drop zeros during preprocessing")
        k = param_count(M, convention)
        if a.size < config.SAMPLES_PER_PARAM * k:
            raise InsufficientData(
                f"{a.size} samples cannot support M={M} ({k} parameters, need {config.SAMPLES_PER_PARAM * k})"
            )

        intensity = a * a
        mean_i = float(intensity.mean())
        bounds = (self.config.scale_bounds[0] * mean_i, self.config.scale_bounds[1] * mean_i)
        logger.info(f"EM fit started (N={a.size}, M={M})")

        best = self._run(a, intensity, self._initial_state(intensity, M, bounds), bounds)
        for seed in self.config.restart_seeds:
            candidate = self._run(a, intensity, self._random_state(a, intensity, M, seed, bounds), bounds)
            logger.info(f"Restart seed={seed}: LL={candidate.loglik:.6f}")
            if candidate.loglik > best.loglik:
                best = candidate

        logger.info(
            f"EM fit finished (M={M}, LL={best.loglik:.6f}, iterations={best.iterations}, "
            f"converged={best.converged})"
        )
        return best

    # ------------------------------------------------------------------
    # initialization
    # ------------------------------------------------------------------

    def _clip_scale(self, value: float, bounds: Tuple[float, float]) -> float:
        return float(np.clip(value, bounds[0], bounds[1]))

    def _clip_alpha(self, value: float) -> float:
        lo, hi = self.config.alpha_bounds
        return float(np.clip(value, lo, hi))

    def _initial_state(self, intensity: np.ndarray, M: int, bounds) -> _State:
        """Equal-count groups of the sorted intensities, lowest group Rayleigh"""
        groups = np.array_split(np.sort(intensity), M)
        lambda0 = self._clip_scale(groups[0].mean(), bounds)
        sigmas, alphas = [], []
        for g in groups[1:]:
            mean = float(g.mean())
            excess = float(g.var()) / (mean * mean) - 1.0 if mean > 0 else 0.0
            alpha = 2.0 / excess if excess > 0 else self.config.alpha_bounds[1]
            sigmas.append(self._clip_scale(mean, bounds))
            alphas.append(self._clip_alpha(alpha))
        return _State(np.full(M, 1.0 / M), lambda0, np.array(sigmas), np.array(alphas))

    def _random_state(self, a: np.ndarray, intensity: np.ndarray, M: int, seed: int, bounds) -> _State:
        """Parameters from a Dirichlet soft assignment drawn from the seed"""
        rng = make_rng(seed, stream=M)
        r = rng.dirichlet(np.ones(M), size=a.size)
        base = self._initial_state(intensity, M, bounds)
        return self._m_step(a, intensity, r, base, bounds, force=True)

    # ------------------------------------------------------------------
    # M-step
    # ------------------------------------------------------------------

    def _update_weights(self, r: np.ndarray) -> np.ndarray:
        w = r.mean(axis=0)
        floor = self.config.weight_floor
        floored = w < floor
        if np.any(floored):
            free = ~floored
            w = np.where(floored, floor, w)
            w[free] *= (1.0 - floor * floored.sum()) / w[free].sum()
        return w / w.sum()

    def _shape_search(self, a: np.ndarray, r: np.ndarray, sigma: float) -> Tuple[float, float]:
        """argmax over alpha of the weighted K log-likelihood at fixed sigma"""
        lo, hi = self.config.alpha_bounds

        def negative_q(log_alpha: float) -> float:
            value = np.dot(r, k_log_pdf(a, KParams(sigma, math.exp(log_alpha))))
            return -value if np.isfinite(value) else np.inf

        res = minimize_scalar(negative_q, bounds=(math.log(lo), math.log(hi)), method='bounded',
                              options={'xatol': _SHAPE_XATOL})
        return self._clip_alpha(math.exp(res.x)), -float(res.fun)

    def _update_k(self, a, intensity, r, sigma_old, alpha_old, bounds, force) -> Tuple[float, float]:
        mask = r > RESPONSIBILITY_CUTOFF
        total = r[mask].sum()
        if total <= 0:
            return sigma_old, alpha_old
        a_m, r_m = a[mask], r[mask]

        sigma_new = self._clip_scale(np.dot(r_m, intensity[mask]) / total, bounds)
        alpha_new, q_new = self._shape_search(a_m, r_m, sigma_new)
        if force:
            return sigma_new, alpha_new

        q_old = float(np.dot(r_m, k_log_pdf(a_m, KParams(sigma_old, alpha_old))))
        if q_new >= q_old:
            return sigma_new, alpha_new

        alpha_alt, q_alt = self._shape_search(a_m, r_m, sigma_old)
        if q_alt >= q_old:
            return sigma_old, alpha_alt
        return sigma_old, alpha_old

    def _m_step(self, a, intensity, r, state: _State, bounds, force: bool = False) -> _State:
        r0 = r[:, 0]
        s0 = r0.sum()
        lambda0 = self._clip_scale(np.dot(r0, intensity) / s0, bounds) if s0 > 0 else state.lambda0

        sigmas = state.sigmas.copy()
        alphas = state.alphas.copy()
        for j in range(state.M - 1):
            sigmas[j], alphas[j] = self._update_k(
                a, intensity, r[:, j + 1], float(state.sigmas[j]), float(state.alphas[j]), bounds, force
            )
        return _State(self._update_weights(r), lambda0, sigmas, alphas)

    # ------------------------------------------------------------------
    # iteration
    # ------------------------------------------------------------------

    def _evaluate(self, a: np.ndarray, state: _State) -> Tuple[np.ndarray, float]:
        log_dens = _log_densities(a, state)
        r, lse, degenerate = _normalize_rows(log_dens)
        if np.any(degenerate):
            worst = a[degenerate]
            raise NonFiniteLikelihood(
                f"{worst.size} samples have zero density under every component "
                f"(amplitudes {worst.min():.6g}..{worst.max():.6g})"
            )
        return r, float(lse.sum())

    def _run(self, a: np.ndarray, intensity: np.ndarray, state: _State, bounds) -> FitResult:
        cfg = self.config
        r, ll = self._evaluate(a, state)
        trace: List[float] = [ll]
        streak = np.zeros(state.M, dtype=int)
        degenerate = set()
        converged = False
        iterations = 0

        for it in range(1, cfg.max_iter + 1):
            candidate = self._m_step(a, intensity, r, state, bounds)
            r_new, ll_new = self._evaluate(a, candidate)

            if ll_new < ll - config.MONOTONE_SLACK * abs(ll):
                logger.warning(f"EM step {it} lowered LL from {ll:.9f} to {ll_new:.9f}; stopping")
                break

            state, r = candidate, r_new
            trace.append(ll_new)
            iterations = it

            pinned = state.weights <= cfg.weight_floor * (1.0 + 1e-9)
            streak = np.where(pinned, streak + 1, 0)
            for j in np.flatnonzero(streak > cfg.degenerate_patience):
                if int(j) not in degenerate:
                    degenerate.add(int(j))
                    logger.warning(f"Component {j} weight pinned at floor for {streak[j]} iterations")

            logger.debug(f"EM iteration {it}: LL={ll_new:.9f}")
            if abs(ll_new - ll) <= cfg.tol * abs(ll):
                converged = True
                ll = ll_new
                break
            ll = ll_new

        mapping = state.canonical_index()
        flagged = sorted(int(mapping[j]) for j in degenerate)
        if flagged:
            warnings.warn(f"Degenerate mixture components {flagged}", DegenerateComponentWarning, stacklevel=3)

        theta = state.to_mixture()
        return FitResult(
            theta=theta,
            loglik=ll,
            loglik_trace=trace,
            iterations=iterations,
            converged=converged,
            n_samples=int(a.size),
            degenerate_components=flagged,
        )


def em_fit(data, M: int, em_config: Optional[EmConfig] = None, convention: str = config.K_CONVENTION) -> FitResult:
    """
    Fit an M-component Rayleigh + K mixture (M = 1 is pure Rayleigh)

    The convention sets the parameter count behind the minimum sample size.
    """
    return GeneralizedEM(em_config).fit(data, M, convention)


def sample_mixture(theta: RKMixture, n: int, seed: int, stream: int = 0) -> Tuple[AmplitudePopulation, np.ndarray]:
    """Composition sampling: component label by weight, then a draw from it"""
    if n < 1:
        raise DomainError(f"Sample count must be >= 1, got {n}")
    rng = make_rng(seed, stream)
    w = theta.weights
    labels = rng.choice(theta.M, size=n, p=w / w.sum())

    samples = np.empty(n)
    idx = labels == 0
    samples[idx] = draw_rayleigh(rng, theta.rayleigh.lambda0, int(idx.sum()))
    for j, comp in enumerate(theta.components, start=1):
        idx = labels == j
        samples[idx] = draw_k(rng, comp.params, int(idx.sum()))
    return AmplitudePopulation(samples), labels.astype(np.int64)


def segment(image, theta: RKMixture) -> np.ndarray:
    """
    Per-pixel argmax of the responsibilities

    np.argmax returns the first maximum, so ties go to the lower component
    index. Non-positive pixels have no K density and are labelled 0.
    """
    values = np.asarray(image, dtype=float)
    if values.ndim != 2:
        raise DomainError(f"segment expects a 2-D amplitude grid, got shape {values.shape}")
    flat = values.ravel()
    labels = np.zeros(flat.size, dtype=np.int32)
    pos = flat > 0
    if np.any(pos):
        labels[pos] = np.argmax(component_log_densities(flat[pos], theta), axis=1)
    return labels.reshape(values.shape)

