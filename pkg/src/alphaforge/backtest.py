"""Dollar-neutral simulation and per-alpha performance statistics.

Positions are rebuilt every day from the alpha values: demeaned across the
present assets and scaled to unit gross exposure. Weights formed from day-t
data are held over day t+1 and earn that day's close-to-close return. No
transaction costs are charged and the book size is constant (P&L is not
reinvested).
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .market import MarketData, Panel, TradingCalendar

TRADING_DAYS = 252
NEUTRALITY_TOL = 1e-10


class NeutralityError(ValueError):
    """Weights are not dollar-neutral with unit gross exposure."""


@dataclass(frozen=True)
class WeightMatrix:
    weights: Panel

    def __post_init__(self) -> None:
        check_weights(self.weights.values)

    @property
    def values(self) -> np.ndarray:
        return self.weights.values


def check_weights(w: np.ndarray, tol: float = NEUTRALITY_TOL) -> None:
    """Raise :class:`NeutralityError` unless every invested day is neutral with gross 1."""
    if np.isnan(w).any():
        raise NeutralityError("weights contain NaN")
    invested = np.any(w != 0, axis=1)
    net = np.abs(w.sum(axis=1))
    gross = np.abs(np.abs(w).sum(axis=1) - 1.0)
    bad = invested & ((net > tol) | (gross > tol))
    if bad.any():
        t = int(np.argmax(bad))
        raise NeutralityError(
            f"day {t}: net {w[t].sum():.3e}, gross {np.abs(w[t]).sum():.12f}; "
            "weights must sum to 0 with absolute sum 1"
        )


def alpha_to_weights(alpha_values: Panel) -> WeightMatrix:
    """Demean each day over present assets, then scale to unit gross.

    Days with fewer than two present values, or where all present values are
    equal, get all-zero weights. Absent assets always get 0.
    """
    a = np.asarray(alpha_values.values, dtype=np.float64)
    present = ~np.isnan(a)
    count = present.sum(axis=1, keepdims=True)
    filled = np.where(present, a, 0.0)
    mean = filled.sum(axis=1, keepdims=True) / np.maximum(count, 1)
    demeaned = np.where(present, a - mean, 0.0)
    hi = np.where(present, a, -np.inf).max(axis=1)
    lo = np.where(present, a, np.inf).min(axis=1)
    spread = (count[:, 0] >= 2) & (hi > lo)
    gross = np.abs(demeaned).sum(axis=1, keepdims=True)
    with np.errstate(invalid="ignore", divide="ignore"):
        w = np.where(spread[:, None], demeaned / gross, 0.0)
    return WeightMatrix(alpha_values.with_values(w))


@dataclass(frozen=True)
class SimResult:
    """Daily series of a simulation. Days before the first position are NaN."""

    calendar: TradingCalendar
    daily_pnl: np.ndarray
    daily_traded_dollars: np.ndarray
    daily_traded_shares: np.ndarray
    book_size: float
    delay_class: int = 1

    @property
    def daily_returns(self) -> np.ndarray:
        return self.daily_pnl / self.book_size


def simulate(
    weights: WeightMatrix | Panel,
    market: MarketData,
    delay_class: int = 1,
    book_size: float = 1e6,
) -> SimResult:
    """Hold day-t weights over day t+1 and record P&L and trading volume.

    Delay-0 and delay-1 alphas share the same close-to-close arithmetic; the
    delay class is carried on the result as metadata. Turnover measures the
    change in target weights (position drift between rebalances is ignored).
    """
    if book_size <= 0:
        raise ValueError("book_size must be positive")
    if delay_class not in (0, 1):
        raise ValueError("delay_class must be 0 or 1")
    panel = weights.weights if isinstance(weights, WeightMatrix) else weights
    if not panel.same_axes(market.close):
        raise ValueError("weights and market data are not aligned")
    w = np.asarray(panel.values, dtype=np.float64)
    check_weights(w)
    ret = market.returns.values
    close = market.close.values
    t_len = w.shape[0]

    pnl = np.full(t_len, np.nan)
    traded = np.full(t_len, np.nan)
    shares = np.full(t_len, np.nan)
    invested = np.flatnonzero(np.any(w != 0, axis=1))
    if invested.size:
        first = int(invested[0])
        prev = np.vstack([np.zeros((1, w.shape[1])), w[:-1]])
        dw = np.abs(w - prev)
        held = prev != 0
        with np.errstate(invalid="ignore", divide="ignore"):
            contrib = np.where(held, prev * ret, 0.0)
            per_share = np.where(dw != 0, book_size * dw / close, 0.0)
        bad_close = (dw != 0) & ~(close > 0)
        per_share[bad_close] = np.nan
        day_pnl = book_size * contrib.sum(axis=1)
        pnl[first + 1 :] = day_pnl[first + 1 :]
        traded[first:] = book_size * dw.sum(axis=1)[first:]
        shares[first:] = per_share.sum(axis=1)[first:]
    return SimResult(market.calendar, pnl, traded, shares, float(book_size), delay_class)


@dataclass(frozen=True)
class AlphaStats:
    sharpe: float
    turnover: float
    holding_period: float
    cents_per_share: float
    daily_vol: float
    ann_return: float
    mean_daily_return: float
    n_days: int
    delay_class: int = 1


def _safe_div(a: float, b: float) -> float:
    return a / b if b != 0 and math.isfinite(b) else math.nan


def compute_stats(sim: SimResult) -> AlphaStats:
    """Annualized Sharpe, turnover, cents-per-share, volatility and return."""
    pnl = sim.daily_pnl[~np.isnan(sim.daily_pnl)]
    if pnl.size < 2:
        raise ValueError(f"need at least 2 valid P&L days, got {pnl.size}")
    p = float(pnl.mean())
    v = float(pnl.std(ddof=1))
    book = sim.book_size
    d = float(np.nanmean(sim.daily_traded_dollars))
    q = float(np.nanmean(sim.daily_traded_shares))
    daily = pnl / book
    turnover = d / book
    return AlphaStats(
        sharpe=math.sqrt(TRADING_DAYS) * _safe_div(p, v),
        turnover=turnover,
        holding_period=_safe_div(1.0, turnover),
        cents_per_share=100.0 * _safe_div(p, q),
        daily_vol=float(daily.std(ddof=1)),
        ann_return=TRADING_DAYS * float(daily.mean()),
        mean_daily_return=float(daily.mean()),
        n_days=int(pnl.size),
        delay_class=sim.delay_class,
    )


def backtest(alpha_values: Panel, market: MarketData, delay_class: int = 1, book_size: float = 1e6) -> tuple[SimResult, AlphaStats]:
    sim = simulate(alpha_to_weights(alpha_values), market, delay_class, book_size)
    return sim, compute_stats(sim)


@dataclass(frozen=True)
class AlphaCorrMatrix:
    ids: tuple
    psi: np.ndarray
    sigma: np.ndarray
    covariance: np.ndarray
    n_obs: int

    def lower_triangle(self) -> np.ndarray:
        """Entries with i > j, row-major (the pair order used by the analytics)."""
        rows, cols = np.tril_indices(len(self.ids), k=-1)
        return self.psi[rows, cols]


def alpha_corr_matrix(daily_returns_per_alpha: Mapping) -> AlphaCorrMatrix:
    """Sample covariance of realized daily returns and the implied correlations.

    Only days on which every series is present are used.
    """
    ids = tuple(daily_returns_per_alpha)
    if len(ids) < 1:
        raise ValueError("need at least one return series")
    x = np.vstack([np.asarray(daily_returns_per_alpha[k], dtype=np.float64) for k in ids])
    common = ~np.isnan(x).any(axis=0)
    x = x[:, common]
    n = x.shape[1]
    if n < 2:
        raise ValueError(f"need at least 2 common valid days, got {n}")
    dev = x - x.mean(axis=1, keepdims=True)
    cov = dev @ dev.T / (n - 1)
    cov = (cov + cov.T) / 2.0
    sigma = np.sqrt(np.diag(cov))
    with np.errstate(invalid="ignore", divide="ignore"):
        psi = cov / np.outer(sigma, sigma)
    psi[np.isinf(psi)] = np.nan
    psi = np.clip(psi, -1.0, 1.0)
    np.fill_diagonal(psi, 1.0)
    return AlphaCorrMatrix(ids, psi, sigma, cov, n)


STATS_COLUMNS = ("id", "delay_class", "S", "T", "holding_period", "C", "sigma", "ann_return")


def _fmt(v: float) -> str:
    return "" if v is None or (isinstance(v, float) and math.isnan(v)) else repr(float(v))


def write_stats_csv(stats: Mapping[object, AlphaStats], path: str | Path) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(STATS_COLUMNS)
        for key, s in stats.items():
            w.writerow(
                [key, s.delay_class]
                + [_fmt(v) for v in (s.sharpe, s.turnover, s.holding_period, s.cents_per_share, s.daily_vol, s.ann_return)]
            )


def write_corr_csv(corr: AlphaCorrMatrix, path: str | Path) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["id"] + [str(i) for i in corr.ids])
        for i, row in zip(corr.ids, corr.psi):
            w.writerow([i] + [_fmt(v) for v in row])


def read_stats_csv(path: str | Path) -> dict[str, AlphaStats]:
    out = {}
    with Path(path).open(newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            f = {k: (float(v) if v else math.nan) for k, v in row.items() if k not in ("id", "delay_class")}
            t = f["T"]
            out[row["id"]] = AlphaStats(
                sharpe=f["S"],
                turnover=t,
                holding_period=f["holding_period"],
                cents_per_share=f["C"],
                daily_vol=f["sigma"],
                ann_return=f["ann_return"],
                mean_daily_return=f["ann_return"] / TRADING_DAYS,
                n_days=0,
                delay_class=int(row["delay_class"]),
            )
    return out


def stats_table(stats: Sequence[AlphaStats]) -> dict[str, np.ndarray]:
    """Column vectors of the quantities summarized per alpha."""
    return {
        "S": np.array([s.sharpe for s in stats]),
        "T": np.array([s.turnover for s in stats]),
        "1/T": np.array([s.holding_period for s in stats]),
        "C": np.array([s.cents_per_share for s in stats]),
        "sigma": np.array([s.daily_vol for s in stats]),
        "R~": np.array([s.ann_return for s in stats]),
    }
