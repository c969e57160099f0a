import numpy as np

from alphaforge.market import IndustryMap, MarketData, Panel, derive_returns


def make_market(open, high, low, close, volume=None, vwap=None, cap=None, sectors=None):
    """Build MarketData from bare (T, N) arrays on a default calendar."""
    close_p = Panel.from_array(close)
    like = close_p.with_values
    volume = np.full(close_p.shape, 1e6) if volume is None else volume
    vwap = (np.asarray(high) + np.asarray(low) + np.asarray(close)) / 3 if vwap is None else vwap
    industry = None
    if sectors is not None:
        industry = IndustryMap(close_p.universe, {"sector": tuple(sectors)})
    return MarketData(
        open=like(open),
        high=like(high),
        low=like(low),
        close=close_p,
        volume=like(volume),
        vwap=like(vwap),
        returns=derive_returns(close_p),
        cap=None if cap is None else like(cap),
        industry=industry,
    )
