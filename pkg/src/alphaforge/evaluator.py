"""Tree-walking interpreter that evaluates validated expressions over market data."""
from __future__ import annotations

import logging
import os
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from . import operators as ops
from .expr import (
    COMPARISONS,
    Binary,
    Call,
    Expr,
    GroupRef,
    InputRef,
    Number,
    Ternary,
    Unary,
    ValidatedExpr,
    parse,
    validate,
)
from .market import INDUSTRY_LEVELS, MarketData, Panel, derive_adv

logger = logging.getLogger(__name__)

_ADV = re.compile(r"adv(\d+)$")


class EvaluationError(RuntimeError):
    pass


class MissingInputError(EvaluationError):
    pass


class InsufficientHistoryError(EvaluationError):
    pass


@dataclass(frozen=True)
class EvalConfig:
    industry_level_override: str | None = None
    warmup_policy: str = "nan"
    variance_epsilon: float = ops.VARIANCE_EPSILON
    flat_correlation: float = ops.FLAT_CORRELATION

    def __post_init__(self) -> None:
        if self.variance_epsilon <= 0:
            raise ValueError("variance_epsilon must be positive")
        if self.warmup_policy != "nan":
            raise ValueError(f"unsupported warmup policy {self.warmup_policy!r}")
        if self.industry_level_override is not None and (
            self.industry_level_override.lower() not in INDUSTRY_LEVELS
        ):
            raise ValueError(f"unknown industry level {self.industry_level_override!r}")


@dataclass(frozen=True)
class EvalReport:
    values: Panel
    warmup_rows: int
    nan_fraction_after_warmup: float
    name: str | None = None


_ARITH = {"+", "-", "*", "/", "^"}
_TS_UNARY = {
    "ts_min": ops.ts_min,
    "ts_max": ops.ts_max,
    "ts_argmax": ops.ts_argmax,
    "ts_argmin": ops.ts_argmin,
    "ts_rank": ops.ts_rank,
    "sum": ops.ts_sum,
    "product": ops.ts_product,
    "stddev": ops.ts_stddev,
    "decay_linear": ops.decay_linear,
    "delay": ops.ts_delay,
    "delta": ops.ts_delta,
}


class _Interpreter:
    def __init__(self, market: MarketData, config: EvalConfig) -> None:
        self.market = market
        self.config = config
        self.shape = market.close.shape
        self.cache: dict[Expr, object] = {}

    def panel(self, value) -> np.ndarray:
        if np.ndim(value) == 2:
            return value
        return np.full(self.shape, float(value))

    def eval(self, node: Expr):
        try:
            return self.cache[node]
        except KeyError:
            pass
        value = self._eval(node)
        self.cache[node] = value
        return value

    def _eval(self, node: Expr):
        if isinstance(node, Number):
            return node.value
        if isinstance(node, InputRef):
            return self.input(node.name)
        if isinstance(node, Unary):
            return ops.elementwise_unary("negate", self.eval(node.operand))
        if isinstance(node, Binary):
            left, right = self.eval(node.left), self.eval(node.right)
            if node.op in _ARITH:
                return ops.elementwise_binary(node.op, left, right)
            if node.op in COMPARISONS:
                return ops.compare(node.op, left, right)
            if node.op == "||":
                return ops.logical_or(left, right)
            raise EvaluationError(f"unknown operator {node.op!r}")
        if isinstance(node, Ternary):
            return ops.ternary_select(
                self.eval(node.cond), self.eval(node.then), self.eval(node.orelse)
            )
        if isinstance(node, Call):
            return self.call(node)
        raise EvaluationError(f"cannot evaluate {node!r}")

    def input(self, name: str) -> np.ndarray:
        m = _ADV.match(name)
        if m:
            return derive_adv(self.market, int(m.group(1))).values
        panel = getattr(self.market, name, None)
        if panel is None:
            raise MissingInputError(f"input {name!r} is not available in the market data")
        return panel.values

    def groups(self, node: GroupRef) -> np.ndarray:
        level = self.config.industry_level_override or node.level
        industry = self.market.industry
        if industry is None or not industry.has(level):
            raise MissingInputError(f"no industry classification at level {level!r}")
        return industry.codes(level)

    def call(self, node: Call):
        name, args = node.name, node.args
        if name in ("abs", "log", "sign"):
            return ops.elementwise_unary(name, self.eval(args[0]))
        if name in ("min", "max"):
            return ops.elementwise_binary(name, self.eval(args[0]), self.eval(args[1]))
        if name == "rank":
            return ops.cs_rank(self.panel(self.eval(args[0])))
        if name == "scale":
            a = args[1].value if len(args) > 1 else 1.0
            return ops.cs_scale(self.panel(self.eval(args[0])), a)
        if name == "signedpower":
            return ops.signedpower(self.eval(args[0]), self.eval(args[1]))
        if name == "indneutralize":
            return ops.cs_indneutralize(self.panel(self.eval(args[0])), self.groups(args[1]))
        if name in ("correlation", "covariance"):
            x = self.panel(self.eval(args[0]))
            y = self.panel(self.eval(args[1]))
            d = int(args[2].value)
            if name == "correlation":
                return ops.ts_correlation(
                    x, y, d, eps=self.config.variance_epsilon, flat=self.config.flat_correlation
                )
            return ops.ts_covariance(x, y, d)
        if name in _TS_UNARY:
            return _TS_UNARY[name](self.panel(self.eval(args[0])), int(args[1].value))
        raise EvaluationError(f"unknown function {name!r}")


def _as_validated(expr: ValidatedExpr | Expr | str) -> ValidatedExpr:
    if isinstance(expr, ValidatedExpr):
        return expr
    if isinstance(expr, str):
        return validate(parse(expr))
    return validate(expr)


def check_requirements(expr: ValidatedExpr, market: MarketData, config: EvalConfig | None = None) -> None:
    """Raise if ``market`` cannot support ``expr``."""
    config = config or EvalConfig()
    available = market.available_inputs()
    for name in sorted(expr.required_inputs):
        base = "volume" if _ADV.match(name) else name
        if base not in available:
            raise MissingInputError(f"input {name!r} is not available in the market data")
    for level in sorted(expr.required_industry_levels):
        level = config.industry_level_override or level
        if market.industry is None or not market.industry.has(level):
            raise MissingInputError(f"no industry classification at level {level!r}")
    if market.n_days <= expr.max_lookback:
        raise InsufficientHistoryError(
            f"expression needs more than {expr.max_lookback} days of history, "
            f"market data has {market.n_days}"
        )


def evaluate(
    expr: ValidatedExpr | Expr | str,
    market: MarketData,
    config: EvalConfig | None = None,
    *,
    name: str | None = None,
) -> EvalReport:
    """Evaluate one expression; the output is aligned to the market panels."""
    config = config or EvalConfig()
    vexpr = _as_validated(expr)
    check_requirements(vexpr, market, config)
    interp = _Interpreter(market, config)
    values = interp.panel(interp.eval(vexpr.expr))
    panel = market.close.with_values(values)
    warmup = vexpr.warmup_rows
    tail = panel.values[warmup:]
    nan_frac = float(np.isnan(tail).mean()) if tail.size else 1.0
    return EvalReport(panel, warmup, nan_frac, name)


@dataclass
class CorpusResult:
    """Per-alpha evaluation outcomes; failures never abort the batch."""

    reports: dict[int, EvalReport] = field(default_factory=dict)
    errors: dict[int, Exception] = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return not self.errors


def default_workers() -> int:
    env = os.environ.get("ALPHAFORGE_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            logger.warning("ignoring non-integer ALPHAFORGE_THREADS=%r", env)
    return min(8, os.cpu_count() or 1)


def evaluate_corpus(
    defs: Iterable,
    market: MarketData,
    config: EvalConfig | None = None,
    *,
    max_workers: int | None = None,
) -> CorpusResult:
    """Evaluate many alphas (``AlphaDef`` objects) concurrently."""
    config = config or EvalConfig()
    defs = list(defs)
    workers = max_workers or default_workers()

    def run(alpha):
        try:
            return alpha.id, evaluate(alpha.compile(), market, config, name=alpha.name), None
        except Exception as exc:  # collected per alpha
            return alpha.id, None, exc

    if workers == 1:
        outcomes = [run(a) for a in defs]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(run, defs))
    result = CorpusResult()
    for alpha_id, report, exc in sorted(outcomes, key=lambda o: o[0]):
        if exc is None:
            result.reports[alpha_id] = report
        else:
            result.errors[alpha_id] = exc
    return result

