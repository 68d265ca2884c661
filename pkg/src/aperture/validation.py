"""Input validation helpers used by the estimator classes and functional ops."""
from __future__ import annotations

import numpy as np


def as_float_matrix(X, name: str = "X", width: int | None = None) -> np.ndarray:
    """Coerce to a 2-D float64 array, checking finiteness and optional width."""
    arr = np.asarray(X, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr.reshape(1, -1)
    if arr.ndim != 2:
        raise ValueError(f"{name} must be 2-dimensional, got shape {arr.shape}")
    if width is not None and arr.shape[1] != width:
        raise ValueError(f"{name} has width {arr.shape[1]}, expected {width}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite values")
    return arr


def as_binary_vector(y, name: str = "y") -> np.ndarray:
    """Coerce to a 1-D array of {0, 1} labels."""
    arr = np.asarray(y)
    if arr.ndim != 1:
        raise ValueError(f"{name} must be 1-dimensional, got shape {arr.shape}")
    vals = np.unique(arr)
    if not np.all(np.isin(vals, (0, 1))):
        raise ValueError(f"{name} must contain only 0/1 labels, got values {vals}")
    return arr.astype(np.float64)


def check_same_length(a, b, name_a: str = "first", name_b: str = "second") -> None:
    if len(a) != len(b):
        raise ValueError(
            f"length mismatch: {name_a} has {len(a)} entries, {name_b} has {len(b)}"
        )


def check_finite_scalar(value: float, name: str) -> float:
    value = float(value)
    if not np.isfinite(value):
        raise ValueError(f"{name} must be finite, got {value}")
    return value
