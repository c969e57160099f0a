"""Trailing-window plumbing shared by the time-series kernels.

All helpers operate on ``(T, N)`` float arrays (dates down the rows) and
apply the full-window rule: an output cell is NaN unless every one of the
``d`` input cells in its trailing window is present.
"""
from __future__ import annotations

from typing import Callable

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

# upper bound on elements materialized per chunk by a window reducer
_CHUNK_ELEMENTS = 2_000_000


def window_nan_mask(x: np.ndarray, d: int) -> np.ndarray:
    """Boolean ``(T-d+1, N)`` mask, True where the trailing window holds a NaN."""
    counts = np.cumsum(np.isnan(x), axis=0, dtype=np.int64)
    counts = np.vstack([np.zeros((1, x.shape[1]), dtype=np.int64), counts])
    return (counts[d:] - counts[:-d]) > 0


def rolling_reduce(
    func: Callable[..., np.ndarray],
    d: int,
    *arrays: np.ndarray,
) -> np.ndarray:
    """Apply ``func`` to trailing windows of one or more aligned arrays.

    ``func`` receives window stacks of shape ``(rows, N, d)`` (oldest value
    first along the last axis) and must return ``(rows, N)``. The first
    ``d - 1`` output rows are warmup and stay NaN.
    """
    first = arrays[0]
    t, n = first.shape
    out = np.full((t, n), np.nan)
    if d > t:
        return out
    mask = np.zeros((t - d + 1, n), dtype=bool)
    for a in arrays:
        mask |= window_nan_mask(a, d)
    views = [sliding_window_view(a, d, axis=0) for a in arrays]
    step = max(1, _CHUNK_ELEMENTS // max(1, n * d))
    with np.errstate(all="ignore"):
        for start in range(0, t - d + 1, step):
            stop = min(start + step, t - d + 1)
            out[start + d - 1 : stop + d - 1] = func(*(v[start:stop] for v in views))
    body = out[d - 1 :]
    body[mask] = np.nan
    return out
