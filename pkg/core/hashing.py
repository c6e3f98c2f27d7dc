"""
Content hashing for provenance records
Reports embed the hash of the preprocessed sample vector so later commands
can refuse data that does not match
"""
import hashlib
import json
from typing import Any

import numpy as np

DIGEST_PREFIX = "sha256:"


def _digest(payload: bytes) -> str:
    return DIGEST_PREFIX + hashlib.sha256(payload).hexdigest()


def hash_report_body(body: Any) -> str:
    """
    Identity of a fit report

    The body is serialized as canonical JSON (sorted keys, no whitespace), so
    two reports of the same fit share an id whatever their timestamps.
    """
    return _digest(json.dumps(body, sort_keys=True, separators=(',', ':')).encode('utf-8'))


def hash_samples(samples: Any) -> str:
    """Hash of a sample vector as little-endian float64 bytes"""
    arr = np.ascontiguousarray(np.asarray(samples, dtype='<f8').ravel())
    return _digest(arr.tobytes())
