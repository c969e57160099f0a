"""The built-in corpus of 101 alpha formulas with per-alpha metadata."""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from importlib import resources
from pathlib import Path

from .expr import ValidatedExpr, parse, split_source_file, validate

DELAY_ZERO = frozenset({42, 48, 53, 54})

# id -> (what changed, text as printed). Only parentheses were touched.
REPAIRS = {
    5: (
        "removed one surplus trailing ')'",
        '(rank((open - (sum(vwap, 10) / 10))) * (-1 * abs(rank((close - vwap))))))',
    ),
    21: (
        "added the missing final ')'",
        '(((((sum(close, 8) / 8) + stddev(close, 8)) < (sum(close, 2) / 2)) ? (-1 * 1) : (((sum(close, 2) / 2) < ((sum(close, 8) / 8) - stddev(close, 8))) ? 1 : (((1 < (volume / adv20)) || ((volume / adv20) == 1)) ? 1 : (-1 * 1))))',
    ),
    24: (
        "added the missing leading '(' around the || condition",
        '(((delta((sum(close, 100) / 100), 100) / delay(close, 100)) < 0.05) || ((delta((sum(close, 100) / 100), 100) / delay(close, 100)) == 0.05)) ? (-1 * (close - ts_min(close, 100))) : (-1 * delta(close, 3)))',
    ),
    31: (
        "moved a ')' from after delta(close, 10) to after delta(close, 3) so decay_linear receives its window 10 instead of rank",
        '((rank(rank(rank(decay_linear((-1 * rank(rank(delta(close, 10))))), 10)))) + rank((-1 * delta(close, 3))) + sign(scale(correlation(adv20, low, 12))))',
    ),
    34: (
        "added the missing final ')'",
        'rank(((1 - rank((stddev(returns, 2) / stddev(returns, 5)))) + (1 - rank(delta(close, 1))))',
    ),
    46: (
        "added the missing final ')'",
        '((0.25 < (((delay(close, 20) - delay(close, 10)) / 10) - ((delay(close, 10) - close) / 10))) ? (-1 * 1) : (((((delay(close, 20) - delay(close, 10)) / 10) - ((delay(close, 10) - close) / 10)) < 0) ? 1 : ((-1 * 1) * (close - delay(close, 1))))',
    ),
    48: (
        "closed the squared term before sum's window argument",
        '(indneutralize(((correlation(delta(close, 1), delta(delay(close, 1), 1), 250) * delta(close, 1)) / close), IndClass.subindustry) / sum(((delta(close, 1) / delay(close, 1))^2, 250))',
    ),
    56: (
        "removed one surplus trailing ')'",
        '(0 - (1 * (rank((sum(returns, 10) / sum(sum(returns, 2), 3))) * rank((returns * cap))))))',
    ),
    60: (
        "added '(' so rank wraps the whole (range position * volume) product",
        '(0 - (1 * ((2 * scale(rank((((close - low) - (high - close)) / (high - low)) * volume)))) - scale(rank(ts_argmax(close, 10))))))',
    ),
    62: (
        "added the missing leading '(' around the comparison",
        '((rank(correlation(vwap, sum(adv20, 22.4101), 9.91009)) < rank(((rank(open) + rank(open)) < (rank(((high + low) / 2)) + rank(high)))))) * -1)',
    ),
    64: (
        "added '(' so delta's first argument is the whole weighted price",
        '((rank(correlation(sum(((open * 0.178404) + (low * (1 - 0.178404))), 12.7054), sum(adv120, 12.7054), 16.6208)) < rank(delta((((high + low) / 2) * 0.178404) + (vwap * (1 - 0.178404))), 3.69741))) * -1)',
    ),
    66: (
        "added '(' so decay_linear's first argument is the whole ratio",
        '((rank(decay_linear(delta(vwap, 3.51013), 7.23052)) + Ts_Rank(decay_linear((((low * 0.96633) + (low * (1 - 0.96633))) - vwap) / (open - ((high + low) / 2))), 11.4157), 6.72611)) * -1)',
    ),
    74: (
        "removed a surplus ')' that closed correlation early",
        '((rank(correlation(close, sum(adv30, 37.4843), 15.1365)) < rank(correlation(rank(((high * 0.0261661) + (vwap * (1 - 0.0261661))))), rank(volume), 11.4791))) * -1)',
    ),
    77: (
        "added '(' / ')' so decay_linear receives its window 20.0451 instead of rank",
        'min(rank(decay_linear((((high + low) / 2) + high) - (vwap + high)), 20.0451), rank(decay_linear(correlation(((high + low) / 2), adv40, 3.1614), 5.64125)))',
    ),
    92: (
        "added '(' so decay_linear's first argument is the whole comparison",
        'min(Ts_Rank(decay_linear((((high + low) / 2) + close) < (low + open)), 14.7221), 18.8683), Ts_Rank(decay_linear(correlation(rank(low), rank(adv30), 7.58555), 6.94024), 6.80584))',
    ),
    100: (
        "added '(' so rank wraps the whole (range position * volume) product",
        '(0 - (1 * (((1.5 * scale(indneutralize(indneutralize(rank((((close - low) - (high - close)) / (high - low)) * volume)), IndClass.subindustry), IndClass.subindustry))) - scale(indneutralize((correlation(close, rank(adv20), 5) - rank(ts_argmin(close, 30))), IndClass.subindustry))) * (volume / adv20))))',
    ),
}


@dataclass(frozen=True)
class AlphaDef:
    id: int
    source: str
    delay_class: int
    required_inputs: frozenset[str]
    required_industry_levels: frozenset[str]
    notes: str = ""

    @property
    def name(self) -> str:
        return f"Alpha#{self.id}"

    def compile(self) -> ValidatedExpr:
        return _compiled(self.source)


@lru_cache(maxsize=None)
def _compiled(source: str) -> ValidatedExpr:
    return validate(parse(source))


def corpus_text() -> str:
    return resources.files("alphaforge").joinpath("data/alphas.txt").read_text(encoding="utf-8")


@lru_cache(maxsize=1)
def _load() -> tuple[AlphaDef, ...]:
    defs = []
    for entry in split_source_file(corpus_text()):
        alpha_id = int(entry.name.split("#")[1])
        v = validate(parse(entry.text, line=entry.line, column=entry.column))
        note = REPAIRS.get(alpha_id)
        defs.append(
            AlphaDef(
                id=alpha_id,
                source=entry.text.strip(),
                delay_class=0 if alpha_id in DELAY_ZERO else 1,
                required_inputs=v.required_inputs,
                required_industry_levels=v.required_industry_levels,
                notes=f"{note[0]}; printed as: {note[1]}" if note else "",
            )
        )
    return tuple(defs)


def load_corpus() -> list[AlphaDef]:
    """All 101 alphas in id order."""
    return list(_load())


def get_alpha(alpha_id: int) -> AlphaDef:
    if not 1 <= alpha_id <= 101:
        raise KeyError(f"alpha id {alpha_id} outside 1..101")
    return _load()[alpha_id - 1]


def select(ids) -> list[AlphaDef]:
    return [get_alpha(int(i)) for i in ids]


@dataclass(frozen=True)
class DependencyRow:
    id: int
    inputs: frozenset[str]
    industry_levels: frozenset[str]
    max_lookback: int


def corpus_dependency_report() -> dict[int, DependencyRow]:
    """Inputs, industry levels and history requirement of every alpha."""
    return {
        a.id: DependencyRow(a.id, a.required_inputs, a.required_industry_levels, a.compile().max_lookback)
        for a in _load()
    }


def export_corpus(path: str | Path) -> Path:
    """Write the corpus in the alpha source-file format."""
    path = Path(path)
    path.write_text(corpus_text(), encoding="utf-8")
    return path
