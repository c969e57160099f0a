"""Parse, evaluate and backtest equity alpha formulas."""
from __future__ import annotations

__version__ = "0.1.0"

from .analytics import (
    RegressionResult,
    TurnoverTensors,
    analyze,
    build_turnover_tensors,
    ols_fit,
    regress_corr_on_turnover,
    regress_return_vol,
    regress_vol_on_turnover,
    summarize_quantiles,
)
from .backtest import (
    AlphaCorrMatrix,
    AlphaStats,
    SimResult,
    WeightMatrix,
    alpha_corr_matrix,
    alpha_to_weights,
    backtest,
    compute_stats,
    simulate,
)
from .corpus import AlphaDef, get_alpha, load_corpus
from .estimators import AlphaTransformer, DollarNeutralWeights, OLSRegressor
from .evaluator import EvalConfig, EvalReport, evaluate, evaluate_corpus
from .expr import ExprError, ParseError, ValidationError, parse, to_source, validate
from .market import (
    IndustryMap,
    MarketData,
    Panel,
    TradingCalendar,
    Universe,
    generate_synthetic,
    load_market_csv,
)

__all__ = [
    "AlphaCorrMatrix", "AlphaDef", "AlphaStats", "AlphaTransformer", "DollarNeutralWeights",
    "EvalConfig", "EvalReport", "ExprError", "IndustryMap", "MarketData", "OLSRegressor",
    "Panel", "ParseError", "RegressionResult", "SimResult", "TradingCalendar", "TurnoverTensors",
    "Universe", "ValidationError", "WeightMatrix", "alpha_corr_matrix", "alpha_to_weights",
    "analyze", "backtest", "build_turnover_tensors", "compute_stats", "evaluate",
    "evaluate_corpus", "generate_synthetic", "get_alpha", "load_corpus", "load_market_csv",
    "ols_fit", "parse", "regress_corr_on_turnover", "regress_return_vol",
    "regress_vol_on_turnover", "simulate", "summarize_quantiles", "to_source", "validate",
]
