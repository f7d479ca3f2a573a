from enum import Enum

import math
import numpy as np
import sys
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Union

from .exceptions import DimensionError
from .prettyjson import prettyjson, format_float

Vector = np.ndarray
Matrix = np.ndarray
ExtendedReal = float
"""A float that may be ``math.inf``. Negative infinity never appears as a rate."""

INF = math.inf

def is_inf(x: ExtendedReal) -> bool:
    return math.isinf(x) and x > 0

def ext_add(a: ExtendedReal, b: ExtendedReal) -> ExtendedReal:
    if is_inf(a) or is_inf(b):
        return INF
    return a + b

def format_real(x: Optional[float]) -> str:
    """17 significant digits, ``+inf``/``-inf`` literals and an empty string for missing values."""
    if x is None:
        return ""
    return format_float(float(x))

def encode_real(x: Optional[float]):
    if x is None:
        return None
    x = float(x)
    return x if math.isfinite(x) else format_float(x)

def decode_real(x) -> Optional[float]:
    if x is None or x == "":
        return None
    if isinstance(x, str):
        if x in ("+inf", "inf"):
            return INF
        if x == "-inf":
            return -INF
    return float(x)

def as_vector(w: Union[Sequence[float], float, Vector], dim: int = None) -> Vector:
    v = np.atleast_1d(np.asarray(w, dtype=float))
    if v.ndim != 1:
        raise DimensionError(f"Expected a vector, got an array of shape {v.shape}")
    if dim is not None and v.shape[0] != dim:
        raise DimensionError(f"Expected a vector of dimension {dim}, got {v.shape[0]}")
    return v

def to_json(thing: Union[Dict, List]) -> str:
    return prettyjson(thing, maxlinelength=120)

def ensure_path(path: Union[Path, str]):
    if isinstance(path, str): path = Path(path)
    return path

def filehash(path: Union[Path, str]):
    import hashlib
    path = ensure_path(path)
    with path.open('rb') as f:
        h = hashlib.sha256(f.read()).hexdigest()
    return h

class SerializableEnum(str, Enum):
    def _generate_next_value_(self, start, count, last_values):
        return self

class ProgressBar:
    """Text progress bar on stderr, so that files written to stdout stay untouched."""

    def __init__(self, length, width=40, label="Procesando"):
        self.toolbar_width = width
        self.length = max(1, length)
        self.label = label
        self.progress_idx = 0
        self._draw()

    def _draw(self):
        done = self.toolbar_width * self.progress_idx // self.length
        msg = "%s %d/%d [%s%s]" % (self.label, self.progress_idx, self.length,
                                  "-" * done, " " * (self.toolbar_width - done))
        sys.stderr.write("\r" + msg)
        if self.progress_idx >= self.length:
            sys.stderr.write("\n")
        sys.stderr.flush()

    def next(self):
        self.progress_idx += 1
        self._draw()
