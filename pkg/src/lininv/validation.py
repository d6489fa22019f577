"""Input validation helpers shared by the estimators and the numeric core."""

import numpy as np


def check_array(x, name, ndim=None, dtype=None):
    """Coerce ``x`` to a numpy array, optionally fixing rank and dtype.

    Raises ValueError on wrong rank or non-finite entries.
    """
    arr = np.asarray(x, dtype=dtype)
    if ndim is not None and arr.ndim != ndim:
        raise ValueError(f"{name} must be {ndim}-dimensional, got shape {arr.shape}")
    if not np.issubdtype(arr.dtype, np.floating):
        arr = arr.astype(np.float64)
    check_finite(arr, name)
    return arr


def check_finite(x, name):
    if not np.all(np.isfinite(x)):
        raise ValueError(f"{name} contains NaN or Inf")


def check_same_shape(a, b, name_a="a", name_b="b"):
    a, b = np.asarray(a), np.asarray(b)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {name_a} {a.shape} vs {name_b} {b.shape}")
    return a, b


def check_positive(value, name):
    if not value > 0:
        raise ValueError(f"{name} must be > 0, got {value}")
    return value
