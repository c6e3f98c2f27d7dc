"""
Core data models for seafloor mixture fitting
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, asdict
from enum import Enum
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from config import config
from core.errors import DataError, DomainError, InvalidQuantity, ModelSpecError, OutOfBounds

WEIGHT_SUM_TOL = 1e-12


class Quantity(str, Enum):
    """What the values of a grid represent"""
    INTENSITY = "intensity"
    AMPLITUDE = "amplitude"
    DECIBEL = "decibel"
    LABEL = "label"


def _positive(name: str, value: float) -> None:
    if not (isinstance(value, (int, float, np.floating, np.integer)) and math.isfinite(value) and value > 0):
        raise DomainError(f"{name} must be a positive finite number, got {value!r}")


@dataclass(frozen=True)
class RayleighParams:
    """Rayleigh amplitude component; lambda0 is the mean-square amplitude"""
    lambda0: float

    def __post_init__(self):
        _positive("lambda0", self.lambda0)

    @property
    def mean_intensity(self) -> float:
        return self.lambda0


@dataclass(frozen=True)
class KParams:
    """K amplitude component as (mean intensity sigma, shape alpha)"""
    sigma: float
    alpha: float

    def __post_init__(self):
        _positive("sigma", self.sigma)
        _positive("alpha", self.alpha)

    @property
    def scale(self) -> float:
        """lambda = sigma / alpha"""
        return self.sigma / self.alpha

    @property
    def mean_intensity(self) -> float:
        return self.sigma


@dataclass(frozen=True)
class KComponent:
    weight: float
    params: KParams


@dataclass(frozen=True)
class RKMixture:
    """
    Rayleigh + K mixture

    Component 0 is the Rayleigh term; components 1..M-1 are K terms kept in
    ascending sigma order.
    """
    w0: float
    rayleigh: RayleighParams
    components: Tuple[KComponent, ...] = ()

    def __post_init__(self):
        comps = tuple(sorted(self.components, key=lambda c: c.params.sigma))
        object.__setattr__(self, 'components', comps)

        weights = self.weights
        if np.any(~np.isfinite(weights)) or np.any(weights <= 0):
            raise DomainError(f"Mixture weights must be positive, got {weights.tolist()}")
        if abs(weights.sum() - 1.0) > WEIGHT_SUM_TOL:
            raise DomainError(f"Mixture weights must sum to 1, got {weights.sum()!r}")

    @property
    def M(self) -> int:
        return 1 + len(self.components)

    @property
    def weights(self) -> np.ndarray:
        return np.array([self.w0] + [c.weight for c in self.components], dtype=float)

    @property
    def mean_intensity(self) -> float:
        """sum_j w_j E_j[I]"""
        total = self.w0 * self.rayleigh.lambda0
        for c in self.components:
            total += c.weight * c.params.sigma
        return total

    @classmethod
    def rayleigh_only(cls, lambda0: float) -> RKMixture:
        return cls(w0=1.0, rayleigh=RayleighParams(lambda0))

    @classmethod
    def from_arrays(cls, weights: Sequence[float], lambda0: float,
                    sigmas: Sequence[float] = (), alphas: Sequence[float] = ()) -> RKMixture:
        """Build from a weight vector (Rayleigh first) and per-K parameter lists"""
        if len(weights) != 1 + len(sigmas) or len(sigmas) != len(alphas):
            raise DataError("weights must have one more entry than sigmas/alphas")
        comps = tuple(
            KComponent(weight=float(w), params=KParams(float(s), float(a)))
            for w, s, a in zip(weights[1:], sigmas, alphas)
        )
        return cls(w0=float(weights[0]), rayleigh=RayleighParams(float(lambda0)), components=comps)

    def rescaled(self, factor: float) -> RKMixture:
        """Mixture for amplitudes multiplied by sqrt(factor): all intensity scales times factor"""
        return RKMixture(
            w0=self.w0,
            rayleigh=RayleighParams(self.rayleigh.lambda0 * factor),
            components=tuple(
                KComponent(c.weight, KParams(c.params.sigma * factor, c.params.alpha))
                for c in self.components
            ),
        )

    def to_dict(self) -> dict:
        return {
            'w0': self.w0,
            'lambda0': self.rayleigh.lambda0,
            'components': [
                {'w': c.weight, 'sigma': c.params.sigma, 'alpha': c.params.alpha}
                for c in self.components
            ],
        }

    @classmethod
    def from_dict(cls, data: dict) -> RKMixture:
        """Parse the model-spec layout; failures name the offending field"""
        if not isinstance(data, dict):
            raise ModelSpecError("model spec must be a JSON object")
        for key in ('w0', 'lambda0'):
            if key not in data:
                raise ModelSpecError(f"missing required field '{key}'")
        w0 = _spec_number(data['w0'], 'w0')
        lambda0 = _spec_number(data['lambda0'], 'lambda0')
        raw_components = data.get('components', [])
        if not isinstance(raw_components, list):
            raise ModelSpecError("must be a list", field="components")

        comps = []
        for i, comp in enumerate(raw_components):
            if not isinstance(comp, dict):
                raise ModelSpecError("must be an object", field=f"components[{i}]")
            missing = [key for key in ('w', 'sigma', 'alpha') if key not in comp]
            if missing:
                raise ModelSpecError(f"missing required field '{missing[0]}'", field=f"components[{i}]")
            w, sigma, alpha = (_spec_number(comp[key], f"components[{i}].{key}") for key in ('w', 'sigma', 'alpha'))
            comps.append(KComponent(w, KParams(sigma, alpha)))

        try:
            return cls(w0=w0, rayleigh=RayleighParams(lambda0), components=tuple(comps))
        except DomainError as e:
            raise ModelSpecError(str(e), field='w0') from e


def _spec_number(value: Any, field_path: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ModelSpecError(f"expected a number, got {value!r}", field=field_path)
    if not (math.isfinite(value) and value > 0):
        raise ModelSpecError(f"must be positive and finite, got {value!r}", field=field_path)
    return float(value)


@dataclass(frozen=True)
class EmConfig:
    """Fitting controls; fits are deterministic given data and config"""
    tol: float = config.EM_TOL
    max_iter: int = config.EM_MAX_ITER
    weight_floor: float = config.WEIGHT_FLOOR
    alpha_bounds: Tuple[float, float] = tuple(config.ALPHA_BOUNDS)
    scale_bounds: Tuple[float, float] = tuple(config.SCALE_BOUNDS)
    degenerate_patience: int = config.DEGENERATE_PATIENCE
    restart_seeds: Tuple[int, ...] = ()

    def __post_init__(self):
        if not self.tol > 0:
            raise DataError(f"tol must be positive, got {self.tol}")
        if self.max_iter < 1:
            raise DataError(f"max_iter must be >= 1, got {self.max_iter}")
        if not 0 < self.weight_floor < 0.1:
            raise DataError(f"weight_floor must be in (0, 0.1), got {self.weight_floor}")
        lo, hi = self.alpha_bounds
        if not 0 < lo < hi:
            raise DataError(f"alpha_bounds must satisfy 0 < lo < hi, got {self.alpha_bounds}")
        lo, hi = self.scale_bounds
        if not 0 < lo < 1 < hi:
            raise DataError(f"scale_bounds must satisfy 0 < lo < 1 < hi, got {self.scale_bounds}")

    def to_dict(self) -> dict:
        d = asdict(self)
        d['alpha_bounds'] = list(self.alpha_bounds)
        d['scale_bounds'] = list(self.scale_bounds)
        d['restart_seeds'] = list(self.restart_seeds)
        return d

    @classmethod
    def from_dict(cls, data: dict) -> EmConfig:
        data = dict(data)
        for key in ('alpha_bounds', 'scale_bounds', 'restart_seeds'):
            if key in data:
                data[key] = tuple(data[key])
        return cls(**data)


@dataclass
class FitResult:
    """Outcome of one EM fit"""
    theta: RKMixture
    loglik: float
    loglik_trace: List[float]
    iterations: int
    converged: bool
    n_samples: int
    degenerate_components: List[int] = field(default_factory=list)

    @property
    def M(self) -> int:
        return self.theta.M

    def to_dict(self) -> dict:
        return {
            'theta': self.theta.to_dict(),
            'loglik': self.loglik,
            'loglik_trace': list(self.loglik_trace),
            'iterations': self.iterations,
            'converged': self.converged,
            'n_samples': self.n_samples,
            'degenerate_components': list(self.degenerate_components),
        }

    @classmethod
    def from_dict(cls, data: dict) -> FitResult:
        data = dict(data)
        data['theta'] = RKMixture.from_dict(data['theta'])
        data.setdefault('degenerate_components', [])
        return cls(**data)


def model_name(M: int) -> str:
    """R-K<M-1> naming; a single component is plain R"""
    return "R" if M == 1 else f"R-K{M - 1}"


@dataclass
class SelectionRow:
    """One model order of a sweep; failed fits carry an error and no numbers"""
    M: int
    k: int
    loglik: Optional[float] = None
    aic: Optional[float] = None
    bic: Optional[float] = None
    fit: Optional[FitResult] = None
    error: Optional[str] = None

    @property
    def model_name(self) -> str:
        return model_name(self.M)

    @property
    def ok(self) -> bool:
        return self.error is None and self.loglik is not None

    def to_dict(self) -> dict:
        d = {
            'model_name': self.model_name,
            'M': self.M,
            'k': self.k,
            'loglik': self.loglik,
            'aic': self.aic,
            'bic': self.bic,
            'error': self.error,
        }
        if self.fit is not None:
            d.update({
                'theta': self.fit.theta.to_dict(),
                'iterations': self.fit.iterations,
                'converged': self.fit.converged,
                'degenerate_components': list(self.fit.degenerate_components),
            })
        return d

    @classmethod
    def from_dict(cls, data: dict) -> SelectionRow:
        fit = None
        if data.get('theta') is not None:
            fit = FitResult(
                theta=RKMixture.from_dict(data['theta']),
                loglik=data['loglik'],
                loglik_trace=[],
                iterations=data.get('iterations', 0),
                converged=data.get('converged', False),
                n_samples=0,
                degenerate_components=data.get('degenerate_components', []),
            )
        return cls(M=data['M'], k=data['k'], loglik=data.get('loglik'), aic=data.get('aic'),
                   bic=data.get('bic'), fit=fit, error=data.get('error'))


@dataclass
class SelectionReport:
    """Per-model criteria and the model chosen by each criterion"""
    rows: List[SelectionRow]
    n_samples: int
    k_convention: str
    selected_by_aic: Optional[int] = None
    selected_by_bic: Optional[int] = None
    selected_by_ll: Optional[int] = None

    def row(self, M: int) -> SelectionRow:
        for r in self.rows:
            if r.M == M:
                return r
        raise KeyError(f"No row for M={M}")

    def to_dict(self) -> dict:
        return {
            'n_samples': self.n_samples,
            'k_convention': self.k_convention,
            'rows': [r.to_dict() for r in self.rows],
            'selected_by_aic': self.selected_by_aic,
            'selected_by_bic': self.selected_by_bic,
            'selected_by_ll': self.selected_by_ll,
        }

    @classmethod
    def from_dict(cls, data: dict) -> SelectionReport:
        return cls(
            rows=[SelectionRow.from_dict(r) for r in data['rows']],
            n_samples=data['n_samples'],
            k_convention=data['k_convention'],
            selected_by_aic=data.get('selected_by_aic'),
            selected_by_bic=data.get('selected_by_bic'),
            selected_by_ll=data.get('selected_by_ll'),
        )


@dataclass
class PfaCurve:
    """Exceedance probabilities on an ascending threshold grid"""
    thresholds: np.ndarray
    empirical: np.ndarray
    model: Dict[int, np.ndarray] = field(default_factory=dict)

    def columns(self) -> List[str]:
        return ['threshold', 'empirical_pfa'] + [f"model_pfa_M{M}" for M in sorted(self.model)]

    def rows(self) -> List[List[float]]:
        cols = [self.thresholds, self.empirical] + [self.model[M] for M in sorted(self.model)]
        return [list(map(float, vals)) for vals in zip(*cols)]


class AmplitudePopulation:
    """
    Decimated, strictly positive 1-D amplitude samples fed to the estimators

    Behaves like a read-only array; dropped counts non-positive inputs removed
    during preprocessing and scale is the RMS divisor applied (1 if none).
    """

    def __init__(self, samples: Any, dropped: int = 0, scale: float = 1.0):
        arr = np.array(samples, dtype=float).ravel()
        arr.setflags(write=False)
        self.samples = arr
        self.dropped = int(dropped)
        self.scale = float(scale)

    def __len__(self) -> int:
        return self.samples.size

    def __array__(self, dtype=None, copy=None):
        if dtype is None:
            return self.samples
        return self.samples.astype(dtype)

    def __iter__(self):
        return iter(self.samples)

    def __getitem__(self, item):
        return self.samples[item]

    def __repr__(self) -> str:
        return f"AmplitudePopulation(n={len(self)}, dropped={self.dropped}, scale={self.scale:.6g})"

    @property
    def mean_square(self) -> float:
        return float(np.mean(self.samples ** 2))


@dataclass(frozen=True)
class ImageGrid:
    """Row-major 2-D grid with its acquisition metadata"""
    values: np.ndarray
    quantity: Quantity
    pixel_size: Tuple[float, float] = (0.02, 0.02)

    def __post_init__(self):
        values = np.asarray(self.values)
        if values.ndim != 2:
            raise DataError(f"Grid values must be 2-D, got shape {values.shape}")
        try:
            quantity = Quantity(self.quantity)
        except ValueError as e:
            raise InvalidQuantity(f"Unknown quantity {self.quantity!r}") from e
        if len(self.pixel_size) != 2 or any(not p > 0 for p in self.pixel_size):
            raise DataError(f"pixel_size must be two positive numbers, got {self.pixel_size}")
        if quantity in (Quantity.INTENSITY, Quantity.AMPLITUDE, Quantity.LABEL):
            if np.any(np.isnan(values)) or np.any(values < 0):
                raise InvalidQuantity(f"{quantity.value} grid contains negative or NaN values")
        values = values.copy()
        values.setflags(write=False)
        object.__setattr__(self, 'values', values)
        object.__setattr__(self, 'quantity', quantity)
        object.__setattr__(self, 'pixel_size', tuple(float(p) for p in self.pixel_size))

    @property
    def height(self) -> int:
        return self.values.shape[0]

    @property
    def width(self) -> int:
        return self.values.shape[1]

    def header(self) -> dict:
        return {
            'width': self.width,
            'height': self.height,
            'pixel_size_m': list(self.pixel_size),
            'quantity': self.quantity.value,
        }


@dataclass(frozen=True)
class TileSpec:
    """Tile window plus subsampling factor and phase"""
    origin: Tuple[int, int] = (0, 0)
    extent: Optional[Tuple[int, int]] = None
    decimation_factor: int = config.DECIMATION_FACTOR
    decimation_phase: Tuple[int, int] = (0, 0)

    def __post_init__(self):
        if self.decimation_factor < 1:
            raise DataError(f"decimation_factor must be >= 1, got {self.decimation_factor}")
        if any(p < 0 or p >= self.decimation_factor for p in self.decimation_phase):
            raise DataError(f"decimation_phase {self.decimation_phase} must lie in [0, {self.decimation_factor})")
        if any(o < 0 for o in self.origin):
            raise OutOfBounds(f"Negative tile origin {self.origin}")
        if self.extent is not None and any(e < 1 for e in self.extent):
            raise OutOfBounds(f"Tile extent must be positive, got {self.extent}")

    def resolve(self, grid: ImageGrid) -> Tuple[int, int, int, int]:
        """(row0, col0, rows, cols) of the window, checked against the grid"""
        r0, c0 = self.origin
        rows, cols = self.extent if self.extent is not None else (grid.height - r0, grid.width - c0)
        if rows < 1 or cols < 1 or r0 + rows > grid.height or c0 + cols > grid.width:
            raise OutOfBounds(
                f"Tile origin={self.origin} extent={(rows, cols)} exceeds grid {grid.height}x{grid.width}"
            )
        return r0, c0, rows, cols

    def to_dict(self) -> dict:
        return {
            'origin': list(self.origin),
            'extent': list(self.extent) if self.extent is not None else None,
            'decimation_factor': self.decimation_factor,
            'decimation_phase': list(self.decimation_phase),
        }

    @classmethod
    def from_dict(cls, data: dict) -> TileSpec:
        extent = data.get('extent')
        return cls(
            origin=tuple(data.get('origin', (0, 0))),
            extent=tuple(extent) if extent is not None else None,
            decimation_factor=data.get('decimation_factor', config.DECIMATION_FACTOR),
            decimation_phase=tuple(data.get('decimation_phase', (0, 0))),
        )
