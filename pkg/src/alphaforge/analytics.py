"""Cross-sectional regressions and summary tables over per-alpha statistics.

The regressions are ordinary least squares with an intercept, solved through a
column-pivoted QR factorization. Reports follow the layout of the published
tables (Estimate / Standard error / t-statistic / R-squared / F) so results on
other data can be compared side by side with :data:`GOLDEN_TABLES`.
"""
from __future__ import annotations

import csv
import io
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np
from scipy import linalg, stats as sps

from .backtest import AlphaCorrMatrix, AlphaStats

RANK_TOL = 1e-10


class RankDeficientError(ValueError):
    pass


@dataclass(frozen=True)
class RegressionResult:
    names: tuple[str, ...]
    coef: np.ndarray
    stderr: np.ndarray
    t: np.ndarray
    p: np.ndarray
    r2: float
    adj_r2: float
    F: float
    n: int
    title: str = ""
    excluded: tuple = ()

    def __getitem__(self, name: str) -> float:
        return float(self.coef[self.names.index(name)])

    @property
    def df_resid(self) -> int:
        return self.n - len(self.names)


def ols_fit(
    y,
    X,
    include_intercept: bool = True,
    names: Sequence[str] | None = None,
    title: str = "",
) -> RegressionResult:
    """Least squares with standard errors, t-statistics, R-squared and F.

    ``X`` is (n, k) without the intercept column; it is prepended when
    ``include_intercept`` is set. The F statistic tests all slopes against the
    intercept-only model (or against the zero model without an intercept).
    """
    y = np.asarray(y, dtype=np.float64).ravel()
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X[:, None]
    if X.shape[0] != y.shape[0]:
        raise ValueError(f"X has {X.shape[0]} rows but y has {y.shape[0]}")
    if names is None:
        names = [f"x{i + 1}" for i in range(X.shape[1])]
    names = list(names)
    if len(names) != X.shape[1]:
        raise ValueError("one name per regressor column is required")
    if include_intercept:
        X = np.column_stack([np.ones(len(y)), X])
        names = ["Intercept"] + names
    n, k = X.shape
    if not (np.isfinite(X).all() and np.isfinite(y).all()):
        raise ValueError("regression inputs must be finite")
    if n <= k:
        raise ValueError(f"need more observations than parameters ({n} <= {k})")

    q, r, piv = linalg.qr(X, mode="economic", pivoting=True)
    diag = np.abs(np.diag(r))
    rank = int((diag > RANK_TOL * max(diag[0], 1.0)).sum()) if diag.size else 0
    if rank < k:
        # dropped pivot columns plus the kept columns that reproduce them
        coeffs = linalg.lstsq(r[:rank, :rank], r[:rank, rank:])[0] if rank else np.zeros((0, k))
        involved = set(piv[rank:].tolist())
        involved.update(piv[:rank][np.any(np.abs(np.atleast_2d(coeffs)) > 1e-8, axis=1)].tolist())
        dependent = [names[j] for j in sorted(involved)]
        raise RankDeficientError(
            "regressor matrix is rank deficient; linearly dependent column(s): "
            + ", ".join(dependent)
        )
    beta_p = linalg.solve_triangular(r, q.T @ y)
    beta = np.empty(k)
    beta[piv] = beta_p
    resid = y - X @ beta
    rss = float(resid @ resid)
    df = n - k
    sigma2 = rss / df
    r_inv = linalg.solve_triangular(r, np.eye(k))
    var_p = np.einsum("ij,ij->i", r_inv, r_inv) * sigma2
    stderr = np.empty(k)
    stderr[piv] = np.sqrt(var_p)
    with np.errstate(divide="ignore", invalid="ignore"):
        t = beta / stderr
    p = 2.0 * sps.t.sf(np.abs(t), df)

    if include_intercept:
        tss = float(((y - y.mean()) ** 2).sum())
        # spread at roundoff level counts as a constant response
        if tss <= n * (64 * np.finfo(float).eps * float(np.abs(y).max())) ** 2:
            tss = 0.0
        df_model = k - 1
        df_total = n - 1
    else:
        tss = float(y @ y)
        df_model = k
        df_total = n
    # a constant response has nothing to explain; report R-squared 0
    r2 = 1.0 - rss / tss if tss > 0 else 0.0
    adj = 1.0 - (1.0 - r2) * df_total / df
    ess = max(tss - rss, 0.0)
    if df_model == 0 or tss == 0:
        F = math.nan
    elif rss > 0:
        F = (ess / df_model) / sigma2
    else:
        F = math.inf if ess > 0 else math.nan
    return RegressionResult(tuple(names), beta, stderr, t, p, r2, adj, F, n, title)


def _as_items(stats) -> list[tuple[object, AlphaStats]]:
    if isinstance(stats, Mapping):
        return list(stats.items())
    return list(enumerate(stats))


def _positive(stats, fields: Sequence[str]) -> tuple[dict[str, np.ndarray], tuple]:
    items = _as_items(stats)
    cols = {f: np.array([getattr(s, f) for _, s in items], dtype=np.float64) for f in fields}
    ok = np.ones(len(items), dtype=bool)
    for v in cols.values():
        ok &= np.isfinite(v) & (v > 0)
    excluded = tuple(key for (key, _), good in zip(items, ok) if not good)
    if excluded:
        warnings.warn(
            f"excluding {len(excluded)} alpha(s) with non-positive or missing "
            f"{'/'.join(fields)} from the log regression: {list(excluded)}",
            RuntimeWarning,
            stacklevel=3,
        )
    if ok.sum() < 3:
        raise ValueError(f"need at least 3 usable alphas, got {int(ok.sum())}")
    return {f: v[ok] for f, v in cols.items()}, excluded


def regress_return_vol(stats, include_turnover: bool = False) -> RegressionResult:
    """ln(R) on ln(sigma) (and ln(T)); the ln(sigma) slope is the scaling exponent."""
    fields = ["mean_daily_return", "daily_vol"] + (["turnover"] if include_turnover else [])
    cols, excluded = _positive(stats, fields)
    X = [np.log(cols["daily_vol"])]
    names = ["ln(sigma)"]
    if include_turnover:
        X.append(np.log(cols["turnover"]))
        names.append("ln(T)")
    title = "ln(R) ~ ln(sigma)" + (" + ln(T)" if include_turnover else "")
    res = ols_fit(np.log(cols["mean_daily_return"]), np.column_stack(X), names=names, title=title)
    return _with_excluded(res, excluded)


def regress_vol_on_turnover(stats) -> RegressionResult:
    cols, excluded = _positive(stats, ["daily_vol", "turnover"])
    res = ols_fit(
        np.log(cols["daily_vol"]), np.log(cols["turnover"]), names=["ln(T)"], title="ln(sigma) ~ ln(T)"
    )
    return _with_excluded(res, excluded)


def _with_excluded(res: RegressionResult, excluded: tuple) -> RegressionResult:
    return RegressionResult(**{**res.__dict__, "excluded": excluded})


@dataclass(frozen=True)
class TurnoverTensors:
    """Flattened pair tensors over the strict lower triangle.

    Pairs are ordered row-major: (1,0), (2,0), (2,1), (3,0), ... in 0-based
    indices, which is the order of ``numpy.tril_indices(n, -1)``.
    """

    x: np.ndarray
    y: np.ndarray
    z: np.ndarray
    ell: np.ndarray

    @property
    def m(self) -> int:
        return self.x.size


def pair_indices(n: int) -> tuple[np.ndarray, np.ndarray]:
    return np.tril_indices(n, k=-1)


def build_turnover_tensors(turnover) -> TurnoverTensors:
    t = np.asarray(turnover, dtype=np.float64).ravel()
    if t.size < 3:
        raise ValueError("need at least 3 alphas")
    if not (np.isfinite(t).all() and (t > 0).all()):
        raise ValueError("turnover values must be finite and positive")
    lt = np.log(t)
    ell = lt - lt.mean()
    i, j = pair_indices(t.size)
    return TurnoverTensors(np.ones(i.size), ell[i] + ell[j], ell[i] * ell[j], ell)


def regress_corr_on_turnover(psi: AlphaCorrMatrix | np.ndarray, turnover) -> RegressionResult:
    """Regress pairwise correlations on the y and z turnover tensors.

    z is centered before fitting. y already has zero mean because the log
    turnovers are demeaned, but the mean of z is minus half the sum of squared
    log turnovers, not zero. Centering z leaves both slopes unchanged and makes
    the intercept equal the mean pairwise correlation.
    """
    mat = psi.psi if isinstance(psi, AlphaCorrMatrix) else np.asarray(psi, dtype=np.float64)
    t = np.asarray(turnover, dtype=np.float64).ravel()
    if mat.ndim != 2 or mat.shape[0] != mat.shape[1] or mat.shape[0] != t.size:
        raise ValueError(
            f"correlation matrix shape {mat.shape} does not match {t.size} turnover values"
        )
    tens = build_turnover_tensors(t)
    i, j = pair_indices(t.size)
    target = mat[i, j]
    if not np.isfinite(target).all():
        raise ValueError("correlation matrix has undefined pairs (zero-variance alpha)")
    X = np.column_stack([tens.y, tens.z - tens.z.mean()])
    return ols_fit(target, X, names=["y_a", "z_a"], title="Psi_a ~ y_a + z_a")


QUANTILE_NAMES = ("Minimum", "1st Quartile", "Median", "Mean", "3rd Quartile", "Maximum")


def summarize_quantiles(values) -> tuple[float, float, float, float, float, float]:
    """(min, q1, median, mean, q3, max) with linearly interpolated quartiles."""
    v = np.asarray(values, dtype=np.float64).ravel()
    v = v[~np.isnan(v)]
    if v.size == 0:
        raise ValueError("cannot summarize an empty vector")
    q1, med, q3 = np.quantile(v, [0.25, 0.5, 0.75])
    # fsum is correctly rounded, so the mean does not depend on input order
    return (float(v.min()), float(q1), float(med), math.fsum(v) / v.size, float(q3), float(v.max()))


# Published reference values; they come from proprietary data and are for
# visual comparison only.
GOLDEN_TABLES: dict[str, dict] = {
    "summary": {
        "S": (1.238, 1.929, 2.224, 2.265, 2.498, 4.162),
        "T": (0.1571, 0.3429, 0.4752, 0.5456, 0.6474, 1.604),
        "1/T": (0.6235, 1.545, 2.104, 2.391, 2.916, 6.365),
        "C": (0.1324, 0.3125, 0.3969, 0.4814, 0.5073, 2.031),
        "10^3 x sigma": (0.9318, 1.194, 1.395, 1.747, 2.019, 10.44),
        "100% x R~": (3.285, 4.4, 5.441, 6.015, 6.296, 28.72),
        "100% x Psi_ij": (-15.09, 7.457, 14.31, 15.86, 22.91, 87.33),
    },
    "ln(R) ~ ln(sigma)": {
        "rows": {"Intercept": (-3.509, 0.295, -11.88), "ln(sigma)": (0.761, 0.046, 16.65)},
        "r2": (0.737, 0.734),
        "F": 277.2,
    },
    "ln(R) ~ ln(sigma) + ln(T)": {
        "rows": {
            "Intercept": (-3.435, 0.324, -10.60),
            "ln(sigma)": (0.775, 0.052, 14.84),
            "ln(T)": (-0.023, 0.040, -0.57),
        },
        "r2": (0.738, 0.732),
        "F": 137.8,
    },
    "Psi_a ~ y_a + z_a": {
        "rows": {
            "Intercept": (0.1587, 0.0017, 95.18),
            "y_a": (0.0067, 0.0023, 2.907),
            "z_a": (0.0474, 0.0063, 7.537),
        },
        "r2": (0.0127, 0.0123),
        "F": 32.55,
    },
    "ln(sigma) ~ ln(T)": {
        "rows": {"Intercept": (-6.174, 0.062, -100.1), "ln(T)": (0.368, 0.068, 5.412)},
        "r2": (0.228, 0.221),
        "F": 29.29,
    },
}


def summary_table(stats, corr: AlphaCorrMatrix | None = None) -> dict[str, tuple]:
    """Quantile summaries in the units of the published summary table."""
    items = [s for _, s in _as_items(stats)]
    cols = {
        "S": [s.sharpe for s in items],
        "T": [s.turnover for s in items],
        "1/T": [s.holding_period for s in items],
        "C": [s.cents_per_share for s in items],
        "10^3 x sigma": [1e3 * s.daily_vol for s in items],
        "100% x R~": [100.0 * s.ann_return for s in items],
    }
    if corr is not None and len(corr.ids) >= 2:
        cols["100% x Psi_ij"] = 100.0 * corr.lower_triangle()
    out = {}
    for key, v in cols.items():
        v = np.asarray(v, dtype=np.float64)
        if np.isnan(v).all():
            continue
        out[key] = summarize_quantiles(v)
    return out


@dataclass
class AnalysisReport:
    summary: dict[str, tuple]
    regressions: list[RegressionResult] = field(default_factory=list)
    failures: dict[str, str] = field(default_factory=dict)

    def to_text(self, include_reference: bool = True) -> str:
        return format_report(self, include_reference)

    def regression_csv(self) -> str:
        return regression_csv(self.regressions)


def analyze(stats, corr: AlphaCorrMatrix | None = None) -> AnalysisReport:
    """Summary table plus the four regressions; failures are recorded, not raised."""
    report = AnalysisReport(summary_table(stats, corr))
    items = _as_items(stats)
    jobs = [
        ("ln(R) ~ ln(sigma)", lambda: regress_return_vol(stats)),
        ("ln(R) ~ ln(sigma) + ln(T)", lambda: regress_return_vol(stats, include_turnover=True)),
    ]
    if corr is not None:
        lookup = dict(items)
        turnover = [lookup[k].turnover for k in corr.ids]
        jobs.append(("Psi_a ~ y_a + z_a", lambda: regress_corr_on_turnover(corr, turnover)))
    jobs.append(("ln(sigma) ~ ln(T)", lambda: regress_vol_on_turnover(stats)))
    for title, job in jobs:
        try:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", RuntimeWarning)
                report.regressions.append(job())
        except (ValueError, np.linalg.LinAlgError) as exc:
            report.failures[title] = str(exc)
    return report


def _g(v: float, digits: int = 4) -> str:
    if v is None or (isinstance(v, float) and math.isnan(v)):
        return "NA"
    return f"{v:.{digits}g}"


def format_summary(summary: Mapping[str, tuple]) -> str:
    lines = ["Quantity".ljust(16) + "".join(n.rjust(14) for n in QUANTILE_NAMES)]
    for key, vals in summary.items():
        lines.append(key.ljust(16) + "".join(_g(v).rjust(14) for v in vals))
    return "\n".join(lines)


def format_regression(res: RegressionResult) -> str:
    lines = [
        "".ljust(12) + "Estimate".rjust(12) + "Std. error".rjust(12) + "t-statistic".rjust(13)
    ]
    for name, b, se, t in zip(res.names, res.coef, res.stderr, res.t):
        lines.append(name.ljust(12) + _g(b).rjust(12) + _g(se).rjust(12) + _g(t).rjust(13))
    lines.append(f"Mult./Adj. R-squared: {_g(res.r2)} / {_g(res.adj_r2)}")
    lines.append(f"F-statistic: {_g(res.F)} on {len(res.names) - 1} and {res.df_resid} DF, n = {res.n}")
    if res.excluded:
        lines.append(f"excluded (non-positive inputs): {', '.join(map(str, res.excluded))}")
    return "\n".join(lines)


def _format_golden(title: str) -> str:
    g = GOLDEN_TABLES[title]
    lines = []
    for name, (b, se, t) in g["rows"].items():
        lines.append(name.ljust(12) + _g(b).rjust(12) + _g(se).rjust(12) + _g(t).rjust(13))
    lines.append(f"Mult./Adj. R-squared: {g['r2'][0]} / {g['r2'][1]}")
    lines.append(f"F-statistic: {g['F']}")
    return "\n".join(lines)


def format_report(report: AnalysisReport, include_reference: bool = True) -> str:
    out = io.StringIO()
    out.write("== Summary ==\n")
    out.write(format_summary(report.summary) + "\n")
    if include_reference:
        out.write("\n-- published reference (not reproducible on other data) --\n")
        out.write(format_summary(GOLDEN_TABLES["summary"]) + "\n")
    for res in report.regressions:
        out.write(f"\n== Regression: {res.title} ==\n")
        out.write(format_regression(res) + "\n")
        if include_reference and res.title in GOLDEN_TABLES:
            out.write("-- published reference --\n")
            out.write(_format_golden(res.title) + "\n")
    for title, msg in report.failures.items():
        out.write(f"\n== Regression: {title} ==\nnot computed: {msg}\n")
    return out.getvalue()


REGRESSION_COLUMNS = ("model", "term", "estimate", "std_error", "t_statistic", "r2", "adj_r2", "F", "n")


def regression_csv(results: Sequence[RegressionResult]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(REGRESSION_COLUMNS)
    for res in results:
        for name, b, se, t in zip(res.names, res.coef, res.stderr, res.t):
            w.writerow([res.title, name, repr(float(b)), repr(float(se)), repr(float(t)),
                        repr(res.r2), repr(res.adj_r2), repr(float(res.F)), res.n])
    return buf.getvalue()


def write_report(report: AnalysisReport, directory: str | Path) -> None:
    directory = Path(directory)
    (directory / "report.txt").write_text(report.to_text(), encoding="utf-8")
    (directory / "regressions.csv").write_text(report.regression_csv(), encoding="utf-8")

