"""Command-line entry point: ``alphaforge validate | run | corpus``.

Exit codes: 0 success, 1 validation failure, 2 data error, 3 internal error.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import sys
import warnings
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from . import __version__
from .analytics import analyze, write_report
from .backtest import AlphaStats, alpha_corr_matrix, backtest, write_corr_csv, write_stats_csv
from .corpus import DELAY_ZERO, AlphaDef, corpus_dependency_report, export_corpus, load_corpus, select
from .evaluator import EvalConfig, InsufficientHistoryError, MissingInputError, evaluate_corpus
from .expr import ExprError, parse, split_source_file, validate
from .market import INDUSTRY_LEVELS, MarketDataError, Panel, generate_synthetic, load_market_csv

logger = logging.getLogger("alphaforge")

EXIT_OK, EXIT_VALIDATION, EXIT_DATA, EXIT_INTERNAL = 0, 1, 2, 3
_SYNTH_KEYS = {"seed", "days", "assets", "groups"}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):  # bad flags are a validation failure, not a data error
        self.print_usage(sys.stderr)
        self.exit(EXIT_VALIDATION, f"{self.prog}: error: {message}\n")


@dataclass(frozen=True)
class RunManifest:
    data: str | None
    synthetic: dict | None
    alphas: str
    book: float
    out: str
    emit_values: bool = False
    industry_level: str | None = None
    threads: int | None = field(default=None, compare=False)

    def __post_init__(self) -> None:
        if (self.data is None) == (self.synthetic is None):
            raise UsageError("exactly one of --data or --synthetic is required")
        if not (self.book > 0 and math.isfinite(self.book)):
            raise UsageError("--book must be a positive number")

    def to_json(self) -> str:
        d = asdict(self)
        d.pop("threads")
        d.pop("out")
        return json.dumps(d, sort_keys=True, indent=2) + "\n"


def parse_synthetic(spec: str) -> dict:
    out = {}
    for part in spec.split(","):
        key, sep, value = part.partition("=")
        key = key.strip()
        if not sep or key not in _SYNTH_KEYS:
            raise UsageError(f"bad --synthetic component {part!r}; expected seed=S,days=D,assets=N[,groups=G]")
        try:
            out[key] = int(value)
        except ValueError:
            raise UsageError(f"--synthetic {key} must be an integer, got {value!r}") from None
    missing = {"seed", "days", "assets"} - out.keys()
    if missing:
        raise UsageError(f"--synthetic is missing {', '.join(sorted(missing))}")
    if out["days"] < 2 or out["assets"] < 2 or out.get("groups", 5) < 1:
        raise UsageError("--synthetic needs days >= 2, assets >= 2, groups >= 1")
    return out


@dataclass(frozen=True)
class Job:
    key: str
    alpha: AlphaDef


def _file_jobs(path: Path) -> list[Job]:
    entries = split_source_file(path.read_text(encoding="utf-8"))
    if not entries:
        raise UsageError(f"{path}: no expressions found")
    jobs, seen = [], set()
    for k, entry in enumerate(entries, start=1):
        name = entry.name
        key = name.split("#", 1)[1] if "#" in name else name
        if key in seen:
            raise UsageError(f"{path}:{entry.line}: duplicate alpha name {name!r}")
        seen.add(key)
        v = validate(parse(entry.text, line=entry.line, column=entry.column))
        delay = 0 if key.isdigit() and int(key) in DELAY_ZERO else 1
        jobs.append(Job(key, AlphaDef(k, entry.text.strip(), delay, v.required_inputs, v.required_industry_levels)))
    return jobs


def select_jobs(spec: str) -> list[Job]:
    """``all``, a comma list of corpus ids (ranges like 1-10 allowed), or a file path."""
    spec = spec.strip()
    if spec == "all":
        return [Job(str(a.id), a) for a in load_corpus()]
    path = Path(spec)
    if path.exists():
        return _file_jobs(path)
    ids: list[int] = []
    for part in spec.split(","):
        lo, sep, hi = part.strip().partition("-")
        try:
            rng = range(int(lo), int(hi) + 1) if sep else [int(lo)]
        except ValueError:
            raise UsageError(f"--alphas: {spec!r} is neither 'all', a list of ids, nor an existing file") from None
        ids.extend(rng)
    bad = [i for i in ids if not 1 <= i <= 101]
    if bad:
        raise UsageError(f"--alphas: ids outside 1..101: {bad}")
    ids = sorted(set(ids))
    return [Job(str(a.id), a) for a in select(ids)]


def _fmt(v: float) -> str:
    return "" if math.isnan(v) else repr(float(v))


def write_values_csv(panel: Panel, path: Path) -> None:
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["date", *panel.universe.assets])
        for date, row in zip(panel.calendar.iso(), panel.values):
            w.writerow([date, *(_fmt(v) for v in row)])


_NAN_STATS = AlphaStats(*([math.nan] * 7), n_days=0)


def run(manifest: RunManifest) -> int:
    jobs = select_jobs(manifest.alphas)
    if manifest.data is not None:
        market = load_market_csv(manifest.data)
    else:
        s = manifest.synthetic
        market = generate_synthetic(s["seed"], s["days"], s["assets"], s.get("groups", 5))
    logger.info("market: %d days x %d assets; %d alpha(s)", market.n_days, len(market.universe), len(jobs))

    config = EvalConfig(industry_level_override=manifest.industry_level)
    result = evaluate_corpus([j.alpha for j in jobs], market, config, max_workers=manifest.threads)
    out = Path(manifest.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "manifest.json").write_text(manifest.to_json(), encoding="utf-8")
    if manifest.emit_values:
        (out / "values").mkdir(exist_ok=True)

    stats: dict[str, AlphaStats] = {}
    returns: dict[str, np.ndarray] = {}
    errors: list[str] = []
    status = EXIT_OK
    for job in jobs:
        a = job.alpha
        exc = result.errors.get(a.id)
        if exc is not None:
            errors.append(f"alpha {job.key}: {type(exc).__name__}: {exc}")
            data_error = isinstance(exc, (MissingInputError, InsufficientHistoryError, MarketDataError))
            status = max(status, EXIT_DATA if data_error else EXIT_INTERNAL)
            continue
        values = result.reports[a.id].values
        if manifest.emit_values:
            write_values_csv(values, out / "values" / f"alpha_{job.key}.csv")
        try:
            sim, st = backtest(values, market, a.delay_class, manifest.book)
        except ValueError as exc:
            # e.g. an alpha that never takes a position on this data
            logger.warning("alpha %s: no statistics: %s", job.key, exc)
            stats[job.key] = AlphaStats(**{**asdict(_NAN_STATS), "delay_class": a.delay_class})
            continue
        stats[job.key] = st
        returns[job.key] = sim.daily_returns

    write_stats_csv(stats, out / "stats.csv")
    corr = None
    if len(returns) >= 2:
        try:
            corr = alpha_corr_matrix(returns)
            write_corr_csv(corr, out / "correlation.csv")
        except ValueError as exc:
            logger.warning("correlation matrix not computed: %s", exc)
    valid = {k: v for k, v in stats.items() if k in returns}
    if valid:
        write_report(analyze(valid, corr), out)
    (out / "errors.txt").write_text("".join(e + "\n" for e in errors), encoding="utf-8")
    for e in errors:
        print(e, file=sys.stderr)
    print(f"{len(stats)} alpha(s) backtested, {len(errors)} failed; outputs in {out}")
    return status


def cmd_validate(path: str) -> int:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        print(f"{path}: {exc.strerror}", file=sys.stderr)
        return EXIT_VALIDATION
    entries = split_source_file(text)
    if not entries:
        print(f"{path}: no expressions found")
        return EXIT_VALIDATION
    failed = 0
    for entry in entries:
        try:
            v = validate(parse(entry.text, line=entry.line, column=entry.column))
        except ExprError as exc:
            failed += 1
            print(f"{path}: {entry.name}: {exc}")
        else:
            print(f"{entry.name}: OK (lookback {v.max_lookback})")
    print(f"{len(entries) - failed} OK, {failed} failed")
    return EXIT_VALIDATION if failed else EXIT_OK


def cmd_corpus_list() -> int:
    for alpha_id, row in corpus_dependency_report().items():
        levels = ",".join(sorted(row.industry_levels)) or "-"
        delay = 0 if alpha_id in DELAY_ZERO else 1
        print(f"{alpha_id:3d}  delay={delay}  lookback={row.max_lookback:3d}  "
              f"inputs={','.join(sorted(row.inputs))}  industry={levels}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="alphaforge", description="Evaluate and backtest alpha formulas.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    v = sub.add_parser("validate", help="parse and validate an alpha source file")
    v.add_argument("file")

    r = sub.add_parser("run", help="evaluate and backtest alphas, write stats and reports")
    src = r.add_mutually_exclusive_group(required=True)
    src.add_argument("--data", metavar="CSV", help="market data, one row per (date, ticker)")
    src.add_argument("--synthetic", metavar="seed=S,days=D,assets=N[,groups=G]")
    r.add_argument("--alphas", "--corpus", default="all", help="'all', ids like 1,5,10-12, or a source file")
    r.add_argument("--book", type=float, default=1e6, help="book size (default 1e6)")
    r.add_argument("--out", default="alphaforge_out", help="output directory")
    r.add_argument("--emit-values", action="store_true", help="also write each alpha's value panel")
    r.add_argument("--industry-level", choices=INDUSTRY_LEVELS, help="override the industry level of indneutralize")
    r.add_argument("--threads", type=int, help="worker threads (default: ALPHAFORGE_THREADS or CPU count)")

    c = sub.add_parser("corpus", help="inspect or export the built-in alphas")
    csub = c.add_subparsers(dest="corpus_command", required=True, parser_class=_Parser)
    e = csub.add_parser("export", help="write the corpus source file")
    e.add_argument("path")
    csub.add_parser("list", help="list ids, delay class, lookback and inputs")
    return p


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    warnings.simplefilter("default")
    try:
        if args.command == "validate":
            return cmd_validate(args.file)
        if args.command == "corpus":
            if args.corpus_command == "export":
                print(export_corpus(args.path))
                return EXIT_OK
            return cmd_corpus_list()
        manifest = RunManifest(
            data=args.data,
            synthetic=parse_synthetic(args.synthetic) if args.synthetic else None,
            alphas=args.alphas,
            book=args.book,
            out=args.out,
            emit_values=args.emit_values,
            industry_level=args.industry_level,
            threads=args.threads,
        )
        return run(manifest)
    except (UsageError, ExprError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (MarketDataError, OSError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except Exception as exc:  # noqa: BLE001 - last-resort exit code contract
        logger.exception("internal error")
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
