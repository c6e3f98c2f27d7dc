"""
Seafloor Mixture Configuration
Defaults for fitting, preprocessing and the CLI. Every value can be
overridden with a SEAFLOOR_* environment variable or a .env file.
"""
import logging
import os

from dotenv import load_dotenv

logger = logging.getLogger(__name__)

load_dotenv()


def _env(name, default, cast):
    """Read SEAFLOOR_<name>, falling back to the default on absence or garbage"""
    raw = os.getenv(f"SEAFLOOR_{name}")
    if raw is None or raw == "":
        return default
    try:
        return cast(raw)
    except ValueError:
        logger.warning(f"Ignoring malformed SEAFLOOR_{name}={raw!r}, using {default!r}")
        return default


def _pair(raw):
    lo, hi = (float(v) for v in raw.split(","))
    return lo, hi


def _one_of(choices):
    def cast(raw):
        if raw not in choices:
            raise ValueError(f"expected one of {choices}")
        return raw
    return cast


# EM
EM_TOL = _env("TOL", 1e-8, float)  # relative LL change
EM_MAX_ITER = _env("MAX_ITER", 500, int)
WEIGHT_FLOOR = _env("WEIGHT_FLOOR", 1e-6, float)
ALPHA_BOUNDS = _env("ALPHA_BOUNDS", (0.05, 500.0), _pair)
SCALE_BOUNDS = _env("SCALE_BOUNDS", (1e-12, 1e6), _pair)  # times mean intensity
DEGENERATE_PATIENCE = 10  # iterations a weight may sit on the floor
SAMPLES_PER_PARAM = 10
MONOTONE_SLACK = 1e-9  # allowed relative LL decrease per iteration

# Model selection
MIN_COMPONENTS = _env("MIN_COMPONENTS", 2, int)
MAX_COMPONENTS = _env("MAX_COMPONENTS", 5, int)
K_CONVENTIONS = ("3M-1", "3M-2")
K_CONVENTION = _env("K_CONVENTION", "3M-1", _one_of(K_CONVENTIONS))
TIE_TOLERANCE = 1e-9

# Preprocessing
DECIMATION_FACTOR = _env("DECIMATION_FACTOR", 6, int)
TILE_SIZE = 600  # pixels per side

# CLI
PFA_GRID = _env("PFA_GRID", "0:15:0.05", str)
JOBS = _env("JOBS", os.cpu_count() or 1, int)
