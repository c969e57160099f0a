"""Hand-built backtest scenarios with expected values worked out by hand."""
import math

import numpy as np

from alphaforge.market import Panel
from helpers import make_market

BOOK = 1e6

# five days, three assets; every row is dollar-neutral with gross 1
WEIGHTS = np.array(
    [
        [0.5, -0.5, 0.0],
        [0.5, -0.5, 0.0],
        [0.0, 0.5, -0.5],
        [-0.25, -0.25, 0.5],
        [0.5, 0.0, -0.5],
    ]
)
RETURNS = [None, [0.01, -0.02, 0.00], [0.02, 0.01, -0.01], [-0.01, 0.03, 0.02], [0.00, -0.01, 0.01]]


def closes():
    c = [[100.0, 50.0, 20.0]]
    for r in RETURNS[1:]:
        c.append([p * (1 + x) for p, x in zip(c[-1], r)])
    return np.array(c)


def market():
    c = closes()
    return make_market(c, c * 1.01, c * 0.99, c)


def weights_panel():
    return Panel.from_array(WEIGHTS)


def expected_stats():
    """Statistics worked out by hand from WEIGHTS, RETURNS and closes()."""
    c = closes()
    # P&L on days 1..4: yesterday's weights times today's returns
    pnl = [
        BOOK * (0.5 * 0.01 + -0.5 * -0.02),  # 15000
        BOOK * (0.5 * 0.02 + -0.5 * 0.01),  # 5000
        BOOK * (0.5 * 0.03 + -0.5 * 0.02),  # 5000
        BOOK * (-0.25 * -0.01 + 0.5 * 0.01),  # 7500
    ]
    p = sum(pnl) / 4  # 8125
    dev = [x - p for x in pnl]
    v = math.sqrt(sum(d * d for d in dev) / 3)
    # gross weight change per day: 1, 0, 2, 2, 2
    traded = [1.0, 0.0, 2.0, 2.0, 2.0]
    turnover = sum(traded) / 5  # 1.4
    shares = [
        0.5 * BOOK / c[0, 0] + 0.5 * BOOK / c[0, 1],
        0.0,
        0.5 * BOOK / c[2, 0] + 1.0 * BOOK / c[2, 1] + 0.5 * BOOK / c[2, 2],
        0.25 * BOOK / c[3, 0] + 0.75 * BOOK / c[3, 1] + 1.0 * BOOK / c[3, 2],
        0.75 * BOOK / c[4, 0] + 0.25 * BOOK / c[4, 1] + 1.0 * BOOK / c[4, 2],
    ]
    q = sum(shares) / 5
    return {
        "pnl": pnl,
        "S": math.sqrt(252) * p / v,
        "T": turnover,
        "C": 100 * p / q,
        "sigma": v / BOOK,
        "R": 252 * p / BOOK,
    }


# three-day path alternating between two portfolios
PATH = np.array([[0.5, -0.5, 0.0], [0.0, 0.5, -0.5], [0.5, -0.5, 0.0]])
PATH_TRADED = [1.0, 0.5 + 1.0 + 0.5, 0.5 + 1.0 + 0.5]
