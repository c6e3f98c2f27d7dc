"""
Tile Preprocessing
Grid loading, dB conversion, tile extraction, decimation, amplitude conversion
and RMS normalization
"""
import logging
import math
from pathlib import Path
from typing import Tuple, Union

import numpy as np

from core.errors import DataError, DomainError
from seafloor.models import AmplitudePopulation, ImageGrid, Quantity, TileSpec
from storage import grid_files

logger = logging.getLogger(__name__)


def load_grid(path: Union[str, Path]) -> ImageGrid:
    """Grid from <name>.f32 + <name>.json"""
    return grid_files.read_grid(path)


def db_to_intensity(grid: ImageGrid) -> ImageGrid:
    """I = 10^(dB/10), relative units"""
    if grid.quantity is not Quantity.DECIBEL:
        raise DataError(f"db_to_intensity expects a decibel grid, got {grid.quantity.value}")
    return ImageGrid(np.power(10.0, grid.values / 10.0), Quantity.INTENSITY, grid.pixel_size)


def intensity_to_db(grid: ImageGrid) -> ImageGrid:
    if grid.quantity is not Quantity.INTENSITY:
        raise DataError(f"intensity_to_db expects an intensity grid, got {grid.quantity.value}")
    if np.any(grid.values <= 0):
        raise DomainError("intensity_to_db needs strictly positive intensities")
    return ImageGrid(10.0 * np.log10(grid.values), Quantity.DECIBEL, grid.pixel_size)


def as_linear(grid: ImageGrid) -> ImageGrid:
    """Decibel grids become intensity; intensity and amplitude pass through"""
    if grid.quantity is Quantity.DECIBEL:
        return db_to_intensity(grid)
    if grid.quantity is Quantity.LABEL:
        raise DataError("Label grids carry no amplitudes")
    return grid


def tile_window(grid: ImageGrid, spec: TileSpec) -> np.ndarray:
    """Undecimated tile values"""
    r0, c0, rows, cols = spec.resolve(grid)
    return grid.values[r0:r0 + rows, c0:c0 + cols]


def tile_amplitudes(grid: ImageGrid, spec: TileSpec) -> np.ndarray:
    """Undecimated tile as a 2-D amplitude array"""
    if grid.quantity not in (Quantity.INTENSITY, Quantity.AMPLITUDE):
        raise DataError(f"Tile extraction needs intensity or amplitude, got {grid.quantity.value}")
    window = tile_window(grid, spec)
    return np.sqrt(window) if grid.quantity is Quantity.INTENSITY else np.array(window)


def extract_and_decimate(grid: ImageGrid, spec: TileSpec) -> AmplitudePopulation:
    """
    Every factor-th pixel from the phase offset, as amplitudes a = sqrt(I)

    Pure subsampling, row-major. Non-positive samples are dropped and counted.
    """
    amplitudes = tile_amplitudes(grid, spec)
    f = spec.decimation_factor
    pr, pc = spec.decimation_phase
    flat = amplitudes[pr::f, pc::f].ravel()

    keep = flat > 0
    dropped = int(flat.size - keep.sum())
    if dropped:
        logger.warning(f"Dropped {dropped} non-positive samples of {flat.size}")
    logger.debug(f"Decimated {amplitudes.shape} tile by {f} (phase {spec.decimation_phase}) -> {int(keep.sum())} samples")
    return AmplitudePopulation(flat[keep], dropped=dropped)


def normalize_rms(samples: AmplitudePopulation) -> Tuple[AmplitudePopulation, float]:
    """Divide by the RMS amplitude; returns the population and the divisor"""
    a = np.asarray(samples)
    if a.size < 1:
        raise DataError("Cannot normalize an empty population")
    scale = math.sqrt(float(np.mean(a * a)))
    if not scale > 0:
        raise DataError("Cannot normalize an all-zero population")
    out = AmplitudePopulation(a / scale, dropped=getattr(samples, 'dropped', 0),
                              scale=getattr(samples, 'scale', 1.0) * scale)
    return out, scale


def preprocess(grid: ImageGrid, spec: TileSpec, normalize: bool = True) -> Tuple[AmplitudePopulation, dict]:
    """Full ingestion pipeline and the record of what it did"""
    population = extract_and_decimate(as_linear(grid), spec)
    if len(population) == 0:
        raise DataError("Tile has no positive samples")
    scale = 1.0
    if normalize:
        population, scale = normalize_rms(population)
    record = {
        'source_quantity': grid.quantity.value,
        'tile': spec.to_dict(),
        'n_samples': len(population),
        'dropped': population.dropped,
        'normalized': normalize,
        'normalization_scale': scale,
    }
    logger.info(f"Preprocessed tile: N={len(population)}, dropped={population.dropped}, scale={scale:.6g}")
    return population, record
