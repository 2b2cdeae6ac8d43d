"""Small shared array validation helpers."""

from __future__ import annotations

import numpy as np

from .exceptions import ShapeError


def as_vector(x, name: str = "array") -> np.ndarray:
    """Return a contiguous 1-D finite float64 view/copy of x, or raise."""
    arr = np.ascontiguousarray(x, dtype=np.float64)
    if arr.ndim != 1 or arr.size < 1:
        raise ShapeError(f"{name} must be 1-D with at least one element, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ShapeError(f"{name} contains non-finite values")
    return arr


def as_bool_mask(m, size: int, name: str = "mask") -> np.ndarray:
    arr = np.ascontiguousarray(m)
    if arr.dtype != np.bool_ or arr.ndim != 1 or arr.size != size:
        raise ShapeError(f"{name} must be a 1-D bool array of length {size}")
    return arr
