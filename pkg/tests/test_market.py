import math

import numpy as np
import pytest

from alphaforge.market import (
    IngestOptions,
    MarketDataError,
    Panel,
    TradingCalendar,
    Universe,
    derive_adv,
    derive_returns,
    generate_synthetic,
    load_market_csv,
    without_cap,
    write_market_csv,
)

HEADER = "date,ticker,open,high,low,close,volume"


def _write(tmp_path, text, name="m.csv"):
    p = tmp_path / name
    p.write_text(text)
    return p


def test_panel_coerces_inf_and_is_read_only():
    cal = TradingCalendar(["2020-01-01", "2020-01-02"])
    uni = Universe(("A", "B"))
    p = Panel(cal, uni, [[1.0, np.inf], [-np.inf, 2.0]])
    assert np.isnan(p.values[0, 1]) and np.isnan(p.values[1, 0])
    with pytest.raises(ValueError):
        p.values[0, 0] = 5.0


def test_panel_shape_checked():
    cal = TradingCalendar(["2020-01-01"])
    with pytest.raises(MarketDataError):
        Panel(cal, Universe(("A", "B")), [[1.0, 2.0, 3.0]])


def test_calendar_must_increase():
    with pytest.raises(MarketDataError):
        TradingCalendar(["2020-01-02", "2020-01-01"])
    with pytest.raises(MarketDataError):
        TradingCalendar(["2020-01-02", "2020-01-02"])


def test_universe_unique():
    with pytest.raises(MarketDataError):
        Universe(("A", "A"))


def test_frame_round_trip():
    p = Panel.from_array(np.arange(6.0).reshape(3, 2))
    q = Panel.from_frame(p.to_frame())
    assert q.same_axes(p)
    assert np.array_equal(q.values, p.values)


def test_derive_returns_hand_values():
    p = Panel.from_array([[10.0, 5.0], [11.0, 0.0], [9.9, 2.0]])
    r = derive_returns(p).values
    assert np.isnan(r[0]).all()
    assert r[1, 0] == pytest.approx(0.1, abs=1e-15)
    assert r[1, 1] == pytest.approx(-1.0)
    assert r[2, 0] == pytest.approx(-0.1, abs=1e-15)
    assert np.isnan(r[2, 1])  # previous close was zero


def test_adv_is_trailing_mean_dollar_volume(small_market):
    m = small_market
    adv = derive_adv(m, 5).values
    dv = m.volume.values * m.vwap.values
    assert np.isnan(adv[:4]).all()
    for t in (4, 10, 299):
        assert np.allclose(adv[t], dv[t - 4 : t + 1].mean(axis=0), rtol=1e-13)


def test_synthetic_is_deterministic_and_consistent():
    a = generate_synthetic(11, 50, 8)
    b = generate_synthetic(11, 50, 8)
    c = generate_synthetic(12, 50, 8)
    assert np.array_equal(a.close.values, b.close.values)
    assert not np.array_equal(a.close.values, c.close.values)
    a.check_invariants()
    assert (a.low.values <= a.vwap.values).all() and (a.vwap.values <= a.high.values).all()
    assert (a.low.values <= np.minimum(a.open.values, a.close.values)).all()
    assert a.available_inputs() >= {"open", "high", "low", "close", "volume", "vwap", "returns", "cap"}
    assert "cap" not in without_cap(a).available_inputs()
    for lvl in ("sector", "industry", "subindustry"):
        assert a.industry.has(lvl)


def test_head_truncates_everything(small_market):
    h = small_market.head(40)
    assert h.n_days == 40
    assert np.array_equal(h.close.values, small_market.close.values[:40])
    assert np.array_equal(h.returns.values, small_market.returns.values[:40], equal_nan=True)


def test_csv_round_trip(tmp_path, small_market):
    path = tmp_path / "m.csv"
    write_market_csv(small_market, path)
    back = load_market_csv(path)
    for name in ("open", "high", "low", "close", "volume", "vwap", "cap"):
        assert np.array_equal(getattr(back, name).values, getattr(small_market, name).values)
    assert back.universe == small_market.universe
    assert back.industry.codes("sector").tolist() == small_market.industry.codes("sector").tolist()


def test_csv_missing_rows_become_nan(tmp_path):
    p = _write(
        tmp_path,
        HEADER + "\n2020-01-02,A,1,2,1,1.5,100\n2020-01-02,B,1,2,1,1.5,100\n2020-01-03,A,1,2,1,1.8,100\n",
    )
    m = load_market_csv(p)
    assert m.close.shape == (2, 2)
    assert np.isnan(m.close.values[1, 1])
    assert m.returns.values[1, 0] == pytest.approx(0.2)
    # typical-price fallback for vwap
    assert m.vwap.values[0, 0] == pytest.approx((1 + 2 + 1 + 1.5) / 4)


@pytest.mark.parametrize(
    "body, fragment",
    [
        ("2020-13-02,A,1,2,1,1.5,100", "line 2: column 'date'"),
        ("2020-01-02,A,1,x,1,1.5,100", "line 2: column 'high': bad number"),
        ("2020-01-02,A,1,2,1,1.5,-1", "negative volume"),
        ("2020-01-02,A,1,2,3,1.5,100", "low 3.0 above high"),
        ("2020-01-02,A,1,2,1,2.5,100", "column 'close'"),
        ("2020-01-02,A,1,2,1,1.5", "expected 7 fields"),
        ("2020-01-02,A,1,2,1,1.5,100\n2020-01-02,A,1,2,1,1.5,100", "line 3: duplicate row"),
    ],
)
def test_csv_errors_name_line_and_column(tmp_path, body, fragment):
    p = _write(tmp_path, HEADER + "\n" + body + "\n")
    with pytest.raises(MarketDataError, match=fragment):
        load_market_csv(p)


def test_csv_structural_errors(tmp_path):
    with pytest.raises(MarketDataError, match="empty file"):
        load_market_csv(_write(tmp_path, ""))
    with pytest.raises(MarketDataError, match="no data rows"):
        load_market_csv(_write(tmp_path, HEADER + "\n"))
    with pytest.raises(MarketDataError, match="lacks columns"):
        load_market_csv(_write(tmp_path, "date,ticker,open\n"))
    with pytest.raises(MarketDataError, match="unknown columns"):
        load_market_csv(_write(tmp_path, HEADER + ",colour\n"))


def test_csv_industry_must_be_constant(tmp_path):
    text = (
        HEADER + ",sector\n"
        "2020-01-02,A,1,2,1,1.5,100,Tech\n"
        "2020-01-03,A,1,2,1,1.5,100,Energy\n"
    )
    with pytest.raises(MarketDataError, match="changes group"):
        load_market_csv(_write(tmp_path, text))


def test_ohlc_check_can_be_disabled(tmp_path):
    p = _write(tmp_path, HEADER + "\n2020-01-02,A,1,2,1,2.5,100\n")
    m = load_market_csv(p, IngestOptions(check_ohlc=False))
    assert m.close.values[0, 0] == 2.5


def test_empty_cells_are_missing(tmp_path):
    p = _write(tmp_path, HEADER + "\n2020-01-02,A,1,2,1,,100\n")
    m = load_market_csv(p)
    assert math.isnan(m.close.values[0, 0])
