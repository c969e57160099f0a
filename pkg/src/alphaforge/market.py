"""Panel data model, market-data ingestion and a seeded synthetic market."""
from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field
from datetime import date
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np
import pandas as pd

from ._windows import rolling_reduce

logger = logging.getLogger(__name__)

INDUSTRY_LEVELS = ("sector", "industry", "subindustry")
PRICE_FIELDS = ("open", "high", "low", "close", "volume", "vwap")
REQUIRED_COLUMNS = ("date", "ticker", "open", "high", "low", "close", "volume")
OPTIONAL_COLUMNS = ("vwap", "cap", "returns") + INDUSTRY_LEVELS


class MarketDataError(ValueError):
    """Raised when market data is malformed or violates an invariant."""


class TradingCalendar:
    """Strictly increasing sequence of trading days."""

    __slots__ = ("dates",)

    def __init__(self, dates: Iterable) -> None:
        arr = np.asarray(list(dates) if not isinstance(dates, np.ndarray) else dates)
        arr = arr.astype("datetime64[D]")
        if arr.ndim != 1 or arr.size == 0:
            raise MarketDataError("calendar needs at least one date")
        if arr.size > 1 and not np.all(arr[1:] > arr[:-1]):
            raise MarketDataError("calendar dates must be strictly increasing")
        arr.setflags(write=False)
        self.dates = arr

    def __len__(self) -> int:
        return self.dates.size

    def __eq__(self, other: object) -> bool:
        return isinstance(other, TradingCalendar) and np.array_equal(self.dates, other.dates)

    def __hash__(self) -> int:
        return hash(self.dates.tobytes())

    def __repr__(self) -> str:
        if len(self) == 0:
            return "TradingCalendar([])"
        return f"TradingCalendar({self.dates[0]}..{self.dates[-1]}, n={len(self)})"

    def head(self, n: int) -> "TradingCalendar":
        return TradingCalendar(self.dates[:n])

    def iso(self) -> list[str]:
        return [str(d) for d in self.dates]


@dataclass(frozen=True)
class Universe:
    """Ordered asset identifiers; the order is the column order of every panel."""

    assets: tuple[str, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "assets", tuple(str(a) for a in self.assets))
        if not self.assets:
            raise MarketDataError("universe needs at least one asset")
        if len(set(self.assets)) != len(self.assets):
            raise MarketDataError("universe assets must be unique")

    def __len__(self) -> int:
        return len(self.assets)


class Panel:
    """Dates x assets matrix of float64 with NaN marking missing cells.

    Panels are immutable. Infinite values are coerced to NaN on construction.
    """

    __slots__ = ("calendar", "universe", "values")

    def __init__(self, calendar: TradingCalendar, universe: Universe, values) -> None:
        vals = np.array(values, dtype=np.float64, copy=True)
        if vals.shape != (len(calendar), len(universe)):
            raise MarketDataError(
                f"panel values have shape {vals.shape}, expected "
                f"({len(calendar)}, {len(universe)})"
            )
        vals[np.isinf(vals)] = np.nan
        vals.setflags(write=False)
        self.calendar = calendar
        self.universe = universe
        self.values = vals

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape

    def __repr__(self) -> str:
        return f"Panel(shape={self.shape}, nan={np.isnan(self.values).mean():.3f})"

    def same_axes(self, other: "Panel") -> bool:
        return self.calendar == other.calendar and self.universe == other.universe

    def with_values(self, values) -> "Panel":
        return Panel(self.calendar, self.universe, values)

    def head(self, n: int) -> "Panel":
        return Panel(self.calendar.head(n), self.universe, self.values[:n])

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            np.array(self.values),
            index=pd.DatetimeIndex(self.calendar.dates, name="date"),
            columns=pd.Index(self.universe.assets, name="ticker"),
        )

    @classmethod
    def from_array(cls, values, start: str = "2000-01-03") -> "Panel":
        """Wrap a bare (T, N) array with business-day dates and tickers A0000..."""
        vals = np.asarray(values, dtype=np.float64)
        dates = np.busday_offset(np.datetime64(start, "D"), np.arange(vals.shape[0]), roll="forward")
        assets = tuple(f"A{j:04d}" for j in range(vals.shape[1]))
        return cls(TradingCalendar(dates), Universe(assets), vals)

    @classmethod
    def from_frame(cls, frame: pd.DataFrame) -> "Panel":
        return cls(
            TradingCalendar(pd.DatetimeIndex(frame.index).values),
            Universe(tuple(frame.columns)),
            frame.to_numpy(dtype=np.float64),
        )


@dataclass(frozen=True)
class IndustryMap:
    """Per-level asset to group assignment. Levels are independent of each other."""

    universe: Universe
    levels: Mapping[str, tuple[str, ...]] = field(default_factory=dict)

    def __post_init__(self) -> None:
        clean = {}
        for level, groups in self.levels.items():
            level = level.lower()
            if level not in INDUSTRY_LEVELS:
                raise MarketDataError(f"unknown industry level {level!r}")
            groups = tuple(str(g) for g in groups)
            if len(groups) != len(self.universe):
                raise MarketDataError(
                    f"industry level {level!r} maps {len(groups)} assets, "
                    f"universe has {len(self.universe)}"
                )
            clean[level] = groups
        object.__setattr__(self, "levels", clean)

    def has(self, level: str) -> bool:
        return level.lower() in self.levels

    def codes(self, level: str) -> np.ndarray:
        """Dense integer group code per universe column."""
        try:
            groups = self.levels[level.lower()]
        except KeyError:
            raise MarketDataError(f"no industry classification at level {level!r}") from None
        _, codes = np.unique(np.asarray(groups), return_inverse=True)
        return codes.astype(np.int64)


@dataclass(frozen=True)
class MarketData:
    """Aligned daily inputs for alpha evaluation.

    All panels share one calendar and universe. ``cap`` is optional; the
    industry map may provide any subset of the classification levels.
    """

    open: Panel
    high: Panel
    low: Panel
    close: Panel
    volume: Panel
    vwap: Panel
    returns: Panel
    cap: Panel | None = None
    industry: IndustryMap | None = None

    def __post_init__(self) -> None:
        ref = self.close
        for name in PRICE_FIELDS + ("returns", "cap"):
            p = getattr(self, name)
            if p is not None and not p.same_axes(ref):
                raise MarketDataError(f"panel {name!r} is not aligned with close")
        if self.industry is not None and self.industry.universe != ref.universe:
            raise MarketDataError("industry map universe does not match panels")

    @property
    def calendar(self) -> TradingCalendar:
        return self.close.calendar

    @property
    def universe(self) -> Universe:
        return self.close.universe

    @property
    def n_days(self) -> int:
        return len(self.calendar)

    def available_inputs(self) -> set[str]:
        names = set(PRICE_FIELDS) | {"returns"}
        if self.cap is not None:
            names.add("cap")
        return names

    def head(self, n: int) -> "MarketData":
        """First ``n`` days of every panel."""
        kw = {name: getattr(self, name).head(n) for name in PRICE_FIELDS + ("returns",)}
        kw["cap"] = self.cap.head(n) if self.cap is not None else None
        kw["industry"] = self.industry
        return MarketData(**kw)

    def check_invariants(self, tol: float = 1e-12) -> None:
        """Raise :class:`MarketDataError` if any price/volume invariant fails."""
        hi, lo = self.high.values, self.low.values
        with np.errstate(invalid="ignore"):
            for name in ("open", "close", "vwap"):
                v = getattr(self, name).values
                if np.any(v > hi * (1 + tol)) or np.any(v < lo * (1 - tol)):
                    raise MarketDataError(f"{name} outside [low, high]")
            if np.any(lo > hi):
                raise MarketDataError("low above high")
            if np.any(self.volume.values < 0):
                raise MarketDataError("negative volume")
            if self.cap is not None and np.any(self.cap.values <= 0):
                raise MarketDataError("non-positive market cap")
        for name in PRICE_FIELDS + ("returns", "cap"):
            p = getattr(self, name)
            if p is not None and np.isinf(p.values).any():
                raise MarketDataError(f"infinite value in {name}")


def derive_returns(close: Panel) -> Panel:
    """Daily close-to-close returns; row 0 and any undefined ratio are NaN."""
    c = close.values
    out = np.full(c.shape, np.nan)
    with np.errstate(divide="ignore", invalid="ignore"):
        prev = c[:-1]
        r = c[1:] / prev - 1.0
        r[prev == 0] = np.nan
    out[1:] = r
    return close.with_values(out)


def dollar_volume(market: MarketData) -> np.ndarray:
    return market.volume.values * market.vwap.values


def derive_adv(market: MarketData, d: int) -> Panel:
    """Trailing ``d``-day mean of volume x vwap, inclusive of today."""
    if d < 1:
        raise ValueError(f"adv window must be >= 1, got {d}")
    dv = dollar_volume(market)
    out = rolling_reduce(lambda w: w.sum(axis=-1) / d, d, dv)
    return market.close.with_values(out)


# --------------------------------------------------------------------------
# CSV ingestion


@dataclass(frozen=True)
class IngestOptions:
    """Switches for :func:`load_market_csv`."""

    check_ohlc: bool = True
    sort_tickers: bool = True
    price_tolerance: float = 1e-9


def _parse_float(text: str, line: int, column: str) -> float:
    text = text.strip()
    if text == "":
        return math.nan
    try:
        value = float(text)
    except ValueError:
        raise MarketDataError(f"line {line}: column {column!r}: bad number {text!r}") from None
    if math.isinf(value):
        raise MarketDataError(f"line {line}: column {column!r}: infinite value")
    return value


def load_market_csv(path: str | Path, config: IngestOptions | None = None) -> MarketData:
    """Read one-row-per-(date, ticker) CSV into aligned panels.

    Missing rows or empty cells become NaN. Without a ``vwap`` column the
    typical price (open+high+low+close)/4 is used; without ``returns`` they
    are derived from close. Prices are assumed split/dividend adjusted.
    """
    config = config or IngestOptions()
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip().lower() for h in next(reader)]
        except StopIteration:
            raise MarketDataError(f"{path}: empty file") from None
        missing = [c for c in REQUIRED_COLUMNS if c not in header]
        if missing:
            raise MarketDataError(f"{path}: header lacks columns {missing}")
        unknown = [c for c in header if c not in REQUIRED_COLUMNS + OPTIONAL_COLUMNS]
        if unknown:
            raise MarketDataError(f"{path}: unknown columns {unknown}")
        idx = {name: header.index(name) for name in header}
        numeric = [c for c in header if c not in ("date", "ticker") + INDUSTRY_LEVELS]

        records: dict[tuple[date, str], tuple[int, dict[str, float]]] = {}
        groups: dict[str, dict[str, str]] = {lvl: {} for lvl in INDUSTRY_LEVELS if lvl in idx}
        for row in reader:
            line = reader.line_num
            if not row or all(not cell.strip() for cell in row):
                continue
            if len(row) != len(header):
                raise MarketDataError(
                    f"line {line}: expected {len(header)} fields, got {len(row)}"
                )
            try:
                day = date.fromisoformat(row[idx["date"]].strip())
            except ValueError:
                raise MarketDataError(
                    f"line {line}: column 'date': bad date {row[idx['date']]!r}"
                ) from None
            ticker = row[idx["ticker"]].strip()
            if not ticker:
                raise MarketDataError(f"line {line}: column 'ticker': empty ticker")
            values = {c: _parse_float(row[idx[c]], line, c) for c in numeric}
            if values["volume"] < 0:
                raise MarketDataError(f"line {line}: column 'volume': negative volume")
            if "cap" in values and values["cap"] <= 0:
                raise MarketDataError(f"line {line}: column 'cap': non-positive market cap")
            if config.check_ohlc:
                _check_bar(values, line, config.price_tolerance)
            key = (day, ticker)
            if key in records:
                raise MarketDataError(
                    f"line {line}: duplicate row for {ticker} on {day} "
                    f"(first seen on line {records[key][0]})"
                )
            records[key] = (line, values)
            for lvl, mapping in groups.items():
                g = row[idx[lvl]].strip()
                if not g:
                    continue
                if mapping.setdefault(ticker, g) != g:
                    raise MarketDataError(
                        f"line {line}: column {lvl!r}: {ticker} changes group "
                        f"{mapping[ticker]!r} -> {g!r}"
                    )
    if not records:
        raise MarketDataError(f"{path}: no data rows")

    dates = sorted({k[0] for k in records})
    tickers = [k[1] for k in records]
    tickers = sorted(set(tickers)) if config.sort_tickers else list(dict.fromkeys(tickers))
    calendar = TradingCalendar(np.array(dates, dtype="datetime64[D]"))
    universe = Universe(tuple(tickers))
    row_of = {d: i for i, d in enumerate(dates)}
    col_of = {t: j for j, t in enumerate(tickers)}
    mats = {c: np.full((len(dates), len(tickers)), np.nan) for c in numeric}
    for (day, ticker), (_, values) in records.items():
        i, j = row_of[day], col_of[ticker]
        for c, v in values.items():
            mats[c][i, j] = v

    def panel(name: str) -> Panel:
        return Panel(calendar, universe, mats[name])

    if "vwap" in mats:
        vwap = panel("vwap")
    else:
        logger.warning("%s: no vwap column, using (open+high+low+close)/4", path)
        vwap = Panel(
            calendar, universe, (mats["open"] + mats["high"] + mats["low"] + mats["close"]) / 4
        )
    close = panel("close")
    returns = panel("returns") if "returns" in mats else derive_returns(close)
    industry = None
    if groups:
        levels = {}
        for lvl, mapping in groups.items():
            absent = [t for t in tickers if t not in mapping]
            if absent:
                raise MarketDataError(f"column {lvl!r}: no group for tickers {absent[:5]}")
            levels[lvl] = tuple(mapping[t] for t in tickers)
        industry = IndustryMap(universe, levels)
    return MarketData(
        open=panel("open"),
        high=panel("high"),
        low=panel("low"),
        close=close,
        volume=panel("volume"),
        vwap=vwap,
        returns=returns,
        cap=panel("cap") if "cap" in mats else None,
        industry=industry,
    )


def _check_bar(values: dict[str, float], line: int, tol: float) -> None:
    hi, lo = values["high"], values["low"]
    if math.isnan(hi) or math.isnan(lo):
        return
    if lo > hi:
        raise MarketDataError(f"line {line}: column 'low': low {lo} above high {hi}")
    for name in ("open", "close", "vwap"):
        v = values.get(name, math.nan)
        if not math.isnan(v) and (v > hi * (1 + tol) or v < lo * (1 - tol)):
            raise MarketDataError(f"line {line}: column {name!r}: {v} outside [{lo}, {hi}]")


def write_market_csv(market: MarketData, path: str | Path) -> None:
    """Inverse of :func:`load_market_csv` (rows with any present field are written)."""
    cols = list(PRICE_FIELDS) + (["cap"] if market.cap is not None else [])
    levels = [lvl for lvl in INDUSTRY_LEVELS if market.industry and market.industry.has(lvl)]
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["date", "ticker"] + cols + levels)
        for i, day in enumerate(market.calendar.iso()):
            for j, ticker in enumerate(market.universe.assets):
                vals = [getattr(market, c).values[i, j] for c in cols]
                if all(math.isnan(v) for v in vals):
                    continue
                cells = ["" if math.isnan(v) else repr(float(v)) for v in vals]
                cells += [market.industry.levels[lvl][j] for lvl in levels]
                w.writerow([day, ticker] + cells)


# --------------------------------------------------------------------------
# synthetic market


def generate_synthetic(
    seed: int,
    days: int,
    assets: int,
    groups_per_level: int = 5,
    *,
    with_cap: bool = True,
    start: str = "2010-01-04",
) -> MarketData:
    """Deterministic random-walk market with OHLCV, vwap, cap and three industry levels.

    Industry levels are assigned round-robin with a level-specific stride so
    the three partitions differ.
    """
    if days < 1 or assets < 2 or groups_per_level < 1:
        raise ValueError("need days >= 1, assets >= 2, groups_per_level >= 1")
    rng = np.random.default_rng(seed)
    vol = rng.uniform(0.01, 0.03, size=assets)
    drift = rng.normal(0.0002, 0.0003, size=assets)
    start_px = np.exp(rng.uniform(np.log(5.0), np.log(300.0), size=assets))

    log_ret = drift + vol * rng.standard_normal((days, assets))
    close = start_px * np.exp(np.cumsum(log_ret, axis=0))
    prev_close = np.vstack([start_px[None, :], close[:-1]])
    gap = 0.3 * vol * rng.standard_normal((days, assets))
    open_ = prev_close * np.exp(gap)
    body_hi = np.maximum(open_, close)
    body_lo = np.minimum(open_, close)
    high = body_hi * np.exp(np.abs(0.5 * vol * rng.standard_normal((days, assets))))
    low = body_lo * np.exp(-np.abs(0.5 * vol * rng.standard_normal((days, assets))))
    # vwap as a random convex combination of the bar extremes and the body
    wts = rng.dirichlet(np.ones(4), size=(days, assets))
    vwap = wts[..., 0] * open_ + wts[..., 1] * high + wts[..., 2] * low + wts[..., 3] * close
    vwap = np.clip(vwap, low, high)
    base_volume = np.exp(rng.uniform(np.log(2e5), np.log(5e6), size=assets))
    volume = np.round(base_volume * rng.lognormal(0.0, 0.4, size=(days, assets)))
    shares_out = np.exp(rng.uniform(np.log(5e7), np.log(2e9), size=assets))
    cap = close * shares_out

    dates = np.busday_offset(np.datetime64(start, "D"), np.arange(days), roll="forward")
    calendar = TradingCalendar(dates)
    universe = Universe(tuple(f"A{j:04d}" for j in range(assets)))
    g = groups_per_level
    levels = {
        "sector": tuple(f"S{j % g:02d}" for j in range(assets)),
        "industry": tuple(f"I{(j // 2) % g:02d}" for j in range(assets)),
        "subindustry": tuple(f"U{(j // 3) % g:02d}" for j in range(assets)),
    }
    close_p = Panel(calendar, universe, close)
    return MarketData(
        open=Panel(calendar, universe, open_),
        high=Panel(calendar, universe, high),
        low=Panel(calendar, universe, low),
        close=close_p,
        volume=Panel(calendar, universe, volume),
        vwap=Panel(calendar, universe, vwap),
        returns=derive_returns(close_p),
        cap=Panel(calendar, universe, cap) if with_cap else None,
        industry=IndustryMap(universe, levels),
    )


def without_cap(market: MarketData) -> MarketData:
    """Copy of ``market`` with the market-cap panel dropped."""
    return MarketData(
        **{name: getattr(market, name) for name in PRICE_FIELDS + ("returns",)},
        cap=None,
        industry=market.industry,
    )


def panels_from_frames(frames: Mapping[str, pd.DataFrame], industry: Mapping[str, Sequence[str]] | None = None) -> MarketData:
    """Build :class:`MarketData` from wide (dates x tickers) DataFrames."""
    close = Panel.from_frame(frames["close"])
    kw = {}
    for name in PRICE_FIELDS:
        if name == "vwap" and name not in frames:
            f = (frames["open"] + frames["high"] + frames["low"] + frames["close"]) / 4
        else:
            f = frames[name]
        kw[name] = Panel(close.calendar, close.universe, f.reindex_like(frames["close"]).to_numpy())
    kw["returns"] = (
        Panel(close.calendar, close.universe, frames["returns"].to_numpy())
        if "returns" in frames
        else derive_returns(close)
    )
    kw["cap"] = (
        Panel(close.calendar, close.universe, frames["cap"].to_numpy()) if "cap" in frames else None
    )
    kw["industry"] = IndustryMap(close.universe, dict(industry)) if industry else None
    return MarketData(**kw)
