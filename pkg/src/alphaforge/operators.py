"""Panel kernels for every function and operator of the alpha language.

Kernels accept :class:`~alphaforge.market.Panel` objects, bare ``(T, N)``
arrays or scalars, and return the same kind they were given (a Panel if any
argument was a Panel). Missing values are NaN; any result that would be
infinite becomes NaN.

Time-series kernels use the full-window rule: the output at ``t`` is NaN
unless all ``d`` values ``x[t-d+1..t]`` are present.
"""
from __future__ import annotations

import functools
import math
from typing import Union

import numpy as np

from ._windows import rolling_reduce
from .market import Panel

ArrayLike = Union[Panel, np.ndarray, float]

VARIANCE_EPSILON = 1e-12
# correlation reported for a window where either side is flat
FLAT_CORRELATION = 0.0


class ShapeMismatchError(ValueError):
    pass


def _finite(a):
    if isinstance(a, np.ndarray):
        a[np.isinf(a)] = np.nan
        return a
    a = float(a)
    return np.nan if np.isinf(a) else a


def kernel(func):
    """Unwrap Panel arguments, run ``func`` on arrays, rewrap the result."""

    @functools.wraps(func)
    def wrapper(*args, **kwargs):
        template = None
        raw = []
        for a in args:
            if isinstance(a, Panel):
                if template is not None and not template.same_axes(a):
                    raise ShapeMismatchError("panels do not share calendar and universe")
                template = template or a
                raw.append(a.values)
            else:
                raw.append(a)
        shapes = {np.shape(a) for a in raw if isinstance(a, np.ndarray) and np.ndim(a) == 2}
        if len(shapes) > 1:
            raise ShapeMismatchError(f"operand shapes differ: {sorted(shapes)}")
        with np.errstate(all="ignore"):
            out = func(*raw, **kwargs)
        out = _finite(np.array(out, dtype=np.float64) if np.ndim(out) else out)
        if template is not None:
            return template.with_values(np.broadcast_to(out, template.shape))
        return out

    return wrapper


def _scalar_pow(a: float, b: float) -> float:
    try:
        return math.pow(a, b)
    except (ValueError, OverflowError):  # negative base with fractional exponent, 0 ** -k, overflow
        return math.nan


_vec_pow = np.frompyfunc(_scalar_pow, 2, 1)


def _pow(x, y) -> np.ndarray:
    """Elementwise real power through the C library pow.

    numpy's vectorized pow is off by one ulp far more often than libm's, which
    matters once results are large; the per-element call costs little next to
    the window kernels.
    """
    return np.asarray(_vec_pow(x, y), dtype=np.float64)


def _as2d(x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2:
        raise ValueError("time-series and cross-sectional kernels need a (T, N) panel")
    return x


# --------------------------------------------------------------------------
# elementwise


@kernel
def elementwise_unary(kind: str, x):
    x = np.asarray(x, dtype=np.float64)
    if kind == "abs":
        return np.abs(x)
    if kind == "log":
        return np.where(x > 0, np.log(np.where(x > 0, x, 1.0)), np.nan)
    if kind == "sign":
        return np.sign(x)
    if kind == "negate":
        return -x
    raise ValueError(f"unknown unary operator {kind!r}")


@kernel
def elementwise_binary(kind: str, x, y):
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if kind == "+":
        return x + y
    if kind == "-":
        return x - y
    if kind == "*":
        return x * y
    if kind == "/":
        return np.where(y == 0, np.nan, x / np.where(y == 0, 1.0, y))
    if kind == "^":
        # real power: negative base with fractional exponent is undefined;
        # IEEE pow would give NaN^0 = 1 and 1^NaN = 1, missing must stay missing
        return np.where(np.isnan(x) | np.isnan(y), np.nan, _pow(x, y))
    if kind == "min":
        return np.minimum(x, y)
    if kind == "max":
        return np.maximum(x, y)
    raise ValueError(f"unknown binary operator {kind!r}")


_COMPARE = {
    "<": np.less,
    ">": np.greater,
    "<=": np.less_equal,
    ">=": np.greater_equal,
    "==": np.equal,
}


@kernel
def compare(kind: str, x, y):
    """1.0 / 0.0 truth values; NaN when either operand is NaN."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    out = _COMPARE[kind](x, y).astype(np.float64)
    return np.where(np.isnan(x) | np.isnan(y), np.nan, out)


@kernel
def logical_or(x, y):
    """Nonzero is true. A true operand decides even if the other is NaN."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    true_x = (x != 0) & ~np.isnan(x)
    true_y = (y != 0) & ~np.isnan(y)
    out = np.where(true_x | true_y, 1.0, 0.0)
    undecided = ~(true_x | true_y) & (np.isnan(x) | np.isnan(y))
    return np.where(undecided, np.nan, out)


@kernel
def ternary_select(cond, a, b):
    cond = np.asarray(cond, dtype=np.float64)
    out = np.where(cond != 0, a, b).astype(np.float64)
    return np.where(np.isnan(cond), np.nan, out)


@kernel
def signedpower(x, a):
    """sign(x) * |x|**a, with a zero base giving 0 for every exponent."""
    x = np.asarray(x, dtype=np.float64)
    out = np.sign(x) * _pow(np.abs(x), a)
    out = np.where(x == 0, 0.0, out)
    return np.where(np.isnan(x) | np.isnan(a), np.nan, out)


# --------------------------------------------------------------------------
# cross-sectional


@kernel
def cs_rank(x):
    """Per-date average-tie rank over present cells, mapped to [0, 1]."""
    x = _as2d(x)
    t, n = x.shape
    order = np.argsort(x, axis=1, kind="stable")  # NaN sorts last
    s = np.take_along_axis(x, order, axis=1)
    pos = np.broadcast_to(np.arange(n), (t, n))
    new_run = np.ones((t, n), dtype=bool)
    new_run[:, 1:] = s[:, 1:] != s[:, :-1]
    last_run = np.ones((t, n), dtype=bool)
    last_run[:, :-1] = s[:, 1:] != s[:, :-1]
    start = np.maximum.accumulate(np.where(new_run, pos, 0), axis=1)
    end = np.minimum.accumulate(np.where(last_run, pos, n)[:, ::-1], axis=1)[:, ::-1]
    avg = (start + end) / 2.0
    count = (~np.isnan(x)).sum(axis=1, keepdims=True).astype(np.float64)
    scaled = np.where(count > 1, avg / np.maximum(count - 1, 1), 0.5)
    out = np.empty((t, n))
    np.put_along_axis(out, order, scaled, axis=1)
    out[np.isnan(x)] = np.nan
    return out


@kernel
def cs_scale(x, a: float = 1.0):
    """Rescale each date so the absolute values of present cells sum to ``a``."""
    x = _as2d(x)
    gross = np.nansum(np.abs(x), axis=1, keepdims=True)
    out = np.where(gross > 0, x * a / np.where(gross > 0, gross, 1.0), 0.0)
    out[np.isnan(x)] = np.nan
    return out


def _group_codes(groups, shape: tuple[int, int]) -> tuple[np.ndarray, int]:
    g = np.asarray(groups)
    if g.ndim == 1:
        g = np.broadcast_to(g, shape)
    if g.shape != shape:
        raise ShapeMismatchError(f"group labels have shape {g.shape}, panel is {shape}")
    labels, codes = np.unique(g, return_inverse=True)
    return codes.reshape(shape), len(labels)


def cs_indneutralize(x: ArrayLike, groups) -> ArrayLike:
    """Subtract, per date, the mean of present cells of each group.

    ``groups`` is a length-N label vector (static classification) or a
    ``(T, N)`` label matrix (per-date classification).
    """

    @kernel
    def _run(values):
        values = _as2d(values)
        t, n = values.shape
        codes, k = _group_codes(groups, (t, n))
        flat = (codes + np.arange(t)[:, None] * k).ravel()
        present = ~np.isnan(values)
        sums = np.bincount(flat, weights=np.where(present, values, 0.0).ravel(), minlength=t * k)
        counts = np.bincount(flat, weights=present.ravel().astype(np.float64), minlength=t * k)
        means = sums / np.where(counts > 0, counts, 1.0)
        return values - means[flat].reshape(t, n)

    return _run(x)


# --------------------------------------------------------------------------
# time-series


@kernel
def ts_delay(x, d: int):
    x = _as2d(x)
    d = int(d)
    if d < 0:
        raise ValueError("delay must be >= 0")
    out = np.full(x.shape, np.nan)
    if d < x.shape[0]:
        out[d:] = x[: x.shape[0] - d]
    return out


@kernel
def ts_delta(x, d: int):
    x = _as2d(x)
    if d < 1:
        raise ValueError("delta window must be >= 1")
    return x - ts_delay(x, d)


def _check_window(d: int, minimum: int = 1) -> int:
    d = int(d)
    if d < minimum:
        raise ValueError(f"window must be >= {minimum}, got {d}")
    return d


def _corr_windows(eps: float, flat: float):
    def reduce(wx, wy):
        d = wx.shape[-1]
        dx = wx - wx.mean(axis=-1, keepdims=True)
        dy = wy - wy.mean(axis=-1, keepdims=True)
        sxx = (dx * dx).sum(axis=-1)
        syy = (dy * dy).sum(axis=-1)
        sxy = (dx * dy).sum(axis=-1)
        corr = np.clip(sxy / np.sqrt(sxx * syy), -1.0, 1.0)
        degenerate = (sxx / (d - 1) < eps) | (syy / (d - 1) < eps)
        return np.where(degenerate, flat, corr)

    return reduce


@kernel
def ts_correlation(x, y, d: int, *, eps: float = VARIANCE_EPSILON, flat: float = FLAT_CORRELATION):
    """Trailing Pearson correlation.

    Where either window's sample variance is below ``eps`` the correlation is
    undefined and ``flat`` is returned instead (0 by default; pass NaN to
    propagate the gap).
    """
    d = _check_window(d, 2)
    x, y = np.broadcast_arrays(_as2d(x), np.asarray(y, dtype=np.float64))
    return rolling_reduce(_corr_windows(eps, flat), d, x, np.ascontiguousarray(y))


def _cov(wx, wy):
    d = wx.shape[-1]
    dx = wx - wx.mean(axis=-1, keepdims=True)
    dy = wy - wy.mean(axis=-1, keepdims=True)
    return (dx * dy).sum(axis=-1) / (d - 1)


@kernel
def ts_covariance(x, y, d: int):
    """Trailing sample covariance (denominator d - 1)."""
    d = _check_window(d, 2)
    x, y = np.broadcast_arrays(_as2d(x), np.asarray(y, dtype=np.float64))
    return rolling_reduce(_cov, d, x, np.ascontiguousarray(y))


@kernel
def ts_sum(x, d: int):
    return rolling_reduce(lambda w: w.sum(axis=-1), _check_window(d), _as2d(x))


@kernel
def ts_product(x, d: int):
    return rolling_reduce(lambda w: w.prod(axis=-1), _check_window(d), _as2d(x))


def _std(w):
    d = w.shape[-1]
    dev = w - w.mean(axis=-1, keepdims=True)
    return np.sqrt((dev * dev).sum(axis=-1) / (d - 1))


@kernel
def ts_stddev(x, d: int):
    """Trailing sample standard deviation (denominator d - 1)."""
    return rolling_reduce(_std, _check_window(d, 2), _as2d(x))


@kernel
def ts_min(x, d: int):
    return rolling_reduce(lambda w: w.min(axis=-1), _check_window(d), _as2d(x))


@kernel
def ts_max(x, d: int):
    return rolling_reduce(lambda w: w.max(axis=-1), _check_window(d), _as2d(x))


@kernel
def ts_argmax(x, d: int):
    """Days since the window maximum (0 = today); ties go to the most recent day."""
    return rolling_reduce(
        lambda w: np.argmax(w[..., ::-1], axis=-1).astype(np.float64), _check_window(d), _as2d(x)
    )


@kernel
def ts_argmin(x, d: int):
    """Days since the window minimum (0 = today); ties go to the most recent day."""
    return rolling_reduce(
        lambda w: np.argmin(w[..., ::-1], axis=-1).astype(np.float64), _check_window(d), _as2d(x)
    )


def _ts_rank(w):
    d = w.shape[-1]
    today = w[..., -1:]
    below = (w < today).sum(axis=-1)
    ties = (w == today).sum(axis=-1)
    return (below + (ties - 1) / 2.0) / (d - 1)


@kernel
def ts_rank(x, d: int):
    """Average-tie rank of today's value within its trailing window, in [0, 1]."""
    return rolling_reduce(_ts_rank, _check_window(d, 2), _as2d(x))


def decay_weights(d: int) -> np.ndarray:
    """Weights oldest -> newest: 1, 2, ..., d divided by d(d+1)/2."""
    return np.arange(1, d + 1, dtype=np.float64) / (d * (d + 1) / 2.0)


@kernel
def decay_linear(x, d: int):
    d = _check_window(d)
    weights = decay_weights(d)
    # elementwise multiply-sum keeps each cell independent of chunking (no BLAS)
    return rolling_reduce(lambda w: (w * weights).sum(axis=-1), d, _as2d(x))
