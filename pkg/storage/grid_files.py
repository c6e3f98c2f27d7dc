"""
Grid and Population Files
Raw little-endian float32 payload (<name>.f32) plus a sidecar JSON header (<name>.json)
"""
import json
import logging
from pathlib import Path
from typing import Tuple, Union

import numpy as np

from core.errors import GridFormatError, MissingHeader, ShapeMismatch
from seafloor.models import AmplitudePopulation, ImageGrid, Quantity

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]

PAYLOAD_DTYPE = np.dtype('<f4')
PAYLOAD_SUFFIX = ".f32"
HEADER_SUFFIX = ".json"
GRID_KEYS = ("width", "height", "pixel_size_m", "quantity")


def _paths(path: PathLike) -> Tuple[Path, Path]:
    """(payload, header) for a path given with or without its suffix"""
    path = Path(path)
    if path.suffix in (PAYLOAD_SUFFIX, HEADER_SUFFIX):
        path = path.with_suffix("")
    return path.with_name(path.name + PAYLOAD_SUFFIX), path.with_name(path.name + HEADER_SUFFIX)


def _read_header(header_path: Path) -> dict:
    if not header_path.exists():
        raise MissingHeader(f"Header not found: {header_path}")
    try:
        header = json.loads(header_path.read_text())
    except json.JSONDecodeError as e:
        raise MissingHeader(f"{header_path}: line {e.lineno}: {e.msg}") from e
    if not isinstance(header, dict):
        raise MissingHeader(f"{header_path}: header must be a JSON object")
    return header


def _read_payload(payload_path: Path, count: int) -> np.ndarray:
    if not payload_path.exists():
        raise GridFormatError(f"Payload not found: {payload_path}")
    expected = count * PAYLOAD_DTYPE.itemsize
    actual = payload_path.stat().st_size
    if actual != expected:
        raise ShapeMismatch(f"{payload_path}: header declares {count} values ({expected} bytes), payload has {actual}")
    return np.fromfile(payload_path, dtype=PAYLOAD_DTYPE).astype(np.float64)


def read_grid(path: PathLike) -> ImageGrid:
    payload_path, header_path = _paths(path)
    header = _read_header(header_path)
    missing = [k for k in GRID_KEYS if k not in header]
    if missing:
        raise MissingHeader(f"{header_path}: missing field(s) {', '.join(missing)}")
    try:
        width, height = int(header["width"]), int(header["height"])
        pixel_size = tuple(float(v) for v in header["pixel_size_m"])
    except (TypeError, ValueError) as e:
        raise GridFormatError(f"{header_path}: {e}") from e
    if width < 1 or height < 1:
        raise ShapeMismatch(f"{header_path}: non-positive dimensions {width}x{height}")

    values = _read_payload(payload_path, width * height).reshape(height, width)
    grid = ImageGrid(values=values, quantity=header["quantity"], pixel_size=pixel_size)
    logger.debug(f"Read {height}x{width} {grid.quantity.value} grid from {payload_path}")
    return grid


def write_grid(grid: ImageGrid, path: PathLike) -> Path:
    payload_path, header_path = _paths(path)
    payload_path.parent.mkdir(parents=True, exist_ok=True)
    np.ascontiguousarray(grid.values, dtype=PAYLOAD_DTYPE).tofile(payload_path)
    header_path.write_text(json.dumps(grid.header(), indent=2) + "\n")
    logger.info(f"Wrote {grid.height}x{grid.width} {grid.quantity.value} grid to {payload_path}")
    return payload_path


def save_population(population: AmplitudePopulation, path: PathLike) -> Path:
    """ASCII (one float per line) unless the path ends in .f32"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    samples = np.asarray(population)
    if path.suffix == PAYLOAD_SUFFIX:
        payload_path, header_path = _paths(path)
        samples.astype(PAYLOAD_DTYPE).tofile(payload_path)
        header_path.write_text(json.dumps({"length": int(samples.size), "quantity": Quantity.AMPLITUDE.value},
                                          indent=2) + "\n")
        path = payload_path
    else:
        path.write_text("".join(f"{float(v)!r}\n" for v in samples))
    logger.info(f"Wrote {samples.size} samples to {path}")
    return path


def load_population(path: PathLike) -> AmplitudePopulation:
    path = Path(path)
    if path.suffix in (PAYLOAD_SUFFIX, HEADER_SUFFIX):
        payload_path, header_path = _paths(path)
        header = _read_header(header_path)
        if "length" not in header:
            raise MissingHeader(f"{header_path}: missing field length")
        return AmplitudePopulation(_read_payload(payload_path, int(header["length"])))
    if not path.exists():
        raise GridFormatError(f"Population file not found: {path}")
    try:
        samples = np.loadtxt(path, dtype=float, ndmin=1)
    except ValueError as e:
        raise GridFormatError(f"{path}: {e}") from e
    return AmplitudePopulation(samples)


def save_labels(labels: np.ndarray, path: PathLike) -> Path:
    """Integer component labels, one per line"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text("".join(f"{int(v)}\n" for v in np.asarray(labels).ravel()))
    return path


def is_grid(path: PathLike) -> bool:
    """True if a sidecar header with grid dimensions sits next to the path"""
    _, header_path = _paths(path)
    if not header_path.exists():
        return False
    try:
        return "width" in json.loads(header_path.read_text())
    except json.JSONDecodeError:
        return False
