"""Input checks shared by the estimator wrappers."""
from __future__ import annotations

import numpy as np

from .market import MarketData, Panel


def check_market(X) -> MarketData:
    if not isinstance(X, MarketData):
        raise TypeError(f"expected MarketData, got {type(X).__name__}")
    return X


def check_panel(x, *, allow_nan: bool = True) -> np.ndarray:
    """Return a float64 (T, N) array; infinities become NaN."""
    arr = x.values if isinstance(x, Panel) else x
    arr = np.array(arr, dtype=np.float64, copy=True)
    if arr.ndim != 2:
        raise ValueError(f"expected a 2-d (dates x assets) array, got shape {arr.shape}")
    arr[np.isinf(arr)] = np.nan
    if not allow_nan and np.isnan(arr).any():
        raise ValueError("input contains NaN")
    return arr


def check_positive(value: float, name: str) -> float:
    value = float(value)
    if not np.isfinite(value) or value <= 0:
        raise ValueError(f"{name} must be a positive finite number, got {value!r}")
    return value
