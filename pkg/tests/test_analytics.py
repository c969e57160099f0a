import math
import warnings

import numpy as np
import pytest

from alphaforge.analytics import (
    GOLDEN_TABLES,
    REGRESSION_COLUMNS,
    RankDeficientError,
    analyze,
    build_turnover_tensors,
    format_regression,
    ols_fit,
    pair_indices,
    regress_corr_on_turnover,
    regress_return_vol,
    regress_vol_on_turnover,
    summarize_quantiles,
    write_report,
)
from alphaforge.backtest import AlphaStats, alpha_corr_matrix
from oracles import mp_ols


def fake_stats(ret, vol, turnover):
    return {
        i + 1: AlphaStats(
            sharpe=math.sqrt(252) * r / v, turnover=t, holding_period=1 / t, cents_per_share=1.0,
            daily_vol=v, ann_return=252 * r, mean_daily_return=r, n_days=500,
        )
        for i, (r, v, t) in enumerate(zip(ret, vol, turnover))
    }


def test_exact_fit():
    x = np.linspace(-3, 5, 40)
    res = ols_fit(2 + 3 * x, x)
    assert np.allclose(res.coef, [2, 3], atol=1e-10, rtol=0)
    assert res.r2 == pytest.approx(1.0, abs=1e-12)
    assert res.F == math.inf or res.F > 1e20


def test_orthogonal_response():
    x = np.array([-1.0, 1.0, -1.0, 1.0])
    y = np.array([1.0, 1.0, -1.0, -1.0])
    res = ols_fit(y, x)
    assert abs(res["x1"]) < 1e-14 and abs(res.t[1]) < 1e-12


@pytest.mark.parametrize("seed", range(25))
def test_against_extended_precision_oracle(seed):
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((100, 2))
    y = 0.3 + X @ rng.standard_normal(2) + rng.standard_normal(100)
    res = ols_fit(y, X)
    coef, se, r2, F = mp_ols(y, X)
    assert np.max(np.abs(res.coef - coef)) <= 1e-9
    assert np.max(np.abs(res.stderr - se)) <= 1e-9
    assert abs(res.r2 - r2) <= 1e-9
    assert F == pytest.approx(res.F, rel=1e-9)


def test_rank_deficiency_names_columns():
    x = np.arange(10.0)
    with pytest.raises(RankDeficientError, match=r"dependent column\(s\): a, b"):
        ols_fit(np.random.default_rng(0).standard_normal(10), np.column_stack([x, 2 * x]), names=["a", "b"])
    with pytest.raises(ValueError):
        ols_fit(np.ones(2), np.ones((2, 1)))
    with pytest.raises(ValueError):
        ols_fit(np.ones(5), np.ones((4, 1)))


def test_no_intercept_option():
    x = np.arange(1.0, 8.0)
    res = ols_fit(2.5 * x, x, include_intercept=False)
    assert res.names == ("x1",) and res["x1"] == pytest.approx(2.5, abs=1e-12)


def test_planted_return_vol_slope():
    rng = np.random.default_rng(4)
    vol = np.exp(rng.uniform(-7.5, -5.5, 60))
    ret = math.exp(-3.5) * vol ** 0.76
    res = regress_return_vol(fake_stats(ret, vol, rng.uniform(0.2, 1.5, 60)))
    assert abs(res["ln(sigma)"] - 0.76) <= 1e-10
    assert abs(res["Intercept"] + 3.5) <= 1e-9
    assert res.title == "ln(R) ~ ln(sigma)"


def test_noise_turnover_column_is_insignificant():
    hits = 0
    for seed in range(100):
        rng = np.random.default_rng(seed)
        vol = np.exp(rng.uniform(-7.5, -5.5, 101))
        ret = np.exp(-3.5 + 0.76 * np.log(vol) + 0.2 * rng.standard_normal(101))
        res = regress_return_vol(fake_stats(ret, vol, np.exp(rng.standard_normal(101))), include_turnover=True)
        hits += abs(res.t[res.names.index("ln(T)")]) < 3
    assert hits >= 95


def test_nonpositive_return_excluded_with_warning():
    rng = np.random.default_rng(5)
    vol = np.exp(rng.uniform(-7, -6, 10))
    ret = vol ** 0.5
    ret[3] = -1e-4
    with pytest.warns(RuntimeWarning, match="excluding 1"):
        res = regress_return_vol(fake_stats(ret, vol, np.ones(10)))
    assert res.excluded == (4,) and res.n == 9
    with pytest.raises(ValueError), warnings.catch_warnings():
        warnings.simplefilter("ignore")
        regress_return_vol(fake_stats([-1.0] * 5, vol[:5], np.ones(5)))


def test_planted_vol_turnover_slope():
    t = np.exp(np.random.default_rng(6).uniform(-2, 0.5, 80))
    vol = np.exp(-6 + 0.4 * np.log(t))
    res = regress_vol_on_turnover(fake_stats(np.full(80, 1e-4), vol, t))
    assert abs(res["ln(T)"] - 0.4) <= 1e-10
    assert res.title == "ln(sigma) ~ ln(T)"


def test_independent_vol_turnover_low_r2():
    rng = np.random.default_rng(7)
    res = regress_vol_on_turnover(fake_stats(np.full(500, 1e-4), np.exp(rng.standard_normal(500)), np.exp(rng.standard_normal(500))))
    assert res.r2 < 0.02


def test_tensors_hand_example():
    tens = build_turnover_tensors(np.exp([-1.0, 0.0, 1.0]))
    assert np.allclose(tens.ell, [-1, 0, 1], atol=1e-15)
    assert np.allclose(tens.y, [-1, 0, 1], atol=1e-15)
    assert np.allclose(tens.z, [0, -1, 0], atol=1e-15)
    assert (tens.x == 1).all()


def test_tensors_constant_turnover():
    tens = build_turnover_tensors(np.full(3, math.e))
    assert tens.m == 3
    assert (tens.y == 0).all() and (tens.z == 0).all()


def test_tensor_pair_count_and_identities():
    t = np.exp(np.random.default_rng(8).standard_normal(101))
    tens = build_turnover_tensors(t)
    assert tens.m == 5050 == 101 * 100 // 2
    assert abs(tens.ell.mean()) <= 1e-12
    assert abs(tens.y.sum() - 100 * tens.ell.sum()) <= 1e-10
    assert abs(tens.y.sum()) <= 1e-10
    assert abs(tens.z.sum() + (tens.ell ** 2).sum() / 2) <= 1e-10
    for mu in (10.0, 1e-3, 7.5):
        other = build_turnover_tensors(mu * t)
        assert np.max(np.abs(other.y - tens.y)) <= 1e-12
        assert np.max(np.abs(other.z - tens.z)) <= 1e-12


def test_tensor_errors():
    with pytest.raises(ValueError):
        build_turnover_tensors([1.0, 2.0])
    with pytest.raises(ValueError):
        build_turnover_tensors([1.0, 0.0, 2.0])


def random_psi(n, rng, obs=300):
    return alpha_corr_matrix({k: rng.standard_normal(obs) + 0.3 * rng.standard_normal() for k in range(n)})


def test_corr_regression_intercept_is_mean_psi():
    rng = np.random.default_rng(9)
    corr = random_psi(30, rng)
    t = np.exp(rng.standard_normal(30))
    res = regress_corr_on_turnover(corr, t)
    i, j = pair_indices(30)
    assert abs(res["Intercept"] - corr.psi[i, j].mean()) <= 1e-10
    assert res.names == ("Intercept", "y_a", "z_a")


def test_corr_regression_constant_psi():
    psi = np.full((6, 6), 0.2)
    np.fill_diagonal(psi, 1.0)
    res = regress_corr_on_turnover(psi, np.exp(np.random.default_rng(10).standard_normal(6)))
    assert res["Intercept"] == pytest.approx(0.2, abs=1e-12)
    assert np.allclose(res.coef[1:], 0, atol=1e-12)
    assert res.r2 == 0.0


def test_corr_regression_planted_z():
    rng = np.random.default_rng(11)
    n = 60
    tens = build_turnover_tensors(np.exp(0.7 * rng.standard_normal(n)))
    i, j = pair_indices(n)
    psi = np.eye(n)
    vals = 0.1 + 0.05 * tens.z + 1e-4 * rng.standard_normal(tens.m)
    psi[i, j] = vals
    psi[j, i] = vals
    res = regress_corr_on_turnover(psi, np.exp(tens.ell))
    k = res.names.index("z_a")
    assert abs(res.coef[k] - 0.05) <= 4 * res.stderr[k]
    assert abs(res["y_a"]) <= 4 * res.stderr[1]


def test_corr_regression_shape_mismatch():
    with pytest.raises(ValueError, match="does not match"):
        regress_corr_on_turnover(np.eye(4), np.ones(3))


def test_quantiles():
    assert summarize_quantiles([1, 2, 3, 4, 5]) == (1, 2, 3, 3, 4, 5)
    assert summarize_quantiles([7.5]) == (7.5,) * 6
    v = np.random.default_rng(12).standard_normal(37)
    assert summarize_quantiles(v) == summarize_quantiles(v[::-1])
    assert summarize_quantiles([1.0, np.nan, 3.0])[0] == 1.0
    with pytest.raises(ValueError):
        summarize_quantiles([])


def test_golden_tables_shipped_for_reference():
    assert GOLDEN_TABLES["summary"]["100% x Psi_ij"][3] == 15.86
    assert set(GOLDEN_TABLES) == {
        "summary", "ln(R) ~ ln(sigma)", "ln(R) ~ ln(sigma) + ln(T)", "Psi_a ~ y_a + z_a", "ln(sigma) ~ ln(T)"
    }


def test_analyze_and_report(tmp_path):
    rng = np.random.default_rng(13)
    n = 12
    vol = np.exp(rng.uniform(-7, -6, n))
    t = np.exp(rng.standard_normal(n) * 0.4)
    stats = fake_stats(np.exp(-3.5 + 0.76 * np.log(vol) + 0.1 * rng.standard_normal(n)), vol, t)
    corr = alpha_corr_matrix({k: rng.standard_normal(200) for k in stats})
    report = analyze(stats, corr)
    assert [r.title for r in report.regressions] == [
        "ln(R) ~ ln(sigma)", "ln(R) ~ ln(sigma) + ln(T)", "Psi_a ~ y_a + z_a", "ln(sigma) ~ ln(T)"
    ]
    assert not report.failures
    assert set(report.summary) == set(GOLDEN_TABLES["summary"])
    text = report.to_text()
    assert "published reference" in text and "Std. error" in text
    write_report(report, tmp_path)
    rows = (tmp_path / "regressions.csv").read_text().splitlines()
    assert rows[0] == ",".join(REGRESSION_COLUMNS)
    assert len(rows) == 1 + 2 + 3 + 3 + 2


def test_analyze_records_failures():
    stats = fake_stats([1e-4, 2e-4], [1e-3, 2e-3], [0.5, 0.6])
    report = analyze(stats)
    assert len(report.failures) == 3 and not report.regressions
    assert "not computed" in report.to_text()


def test_format_regression_mentions_exclusions():
    rng = np.random.default_rng(14)
    vol = np.exp(rng.uniform(-7, -6, 8))
    ret = vol ** 0.7
    ret[0] = 0.0
    with pytest.warns(RuntimeWarning):
        res = regress_return_vol(fake_stats(ret, vol, np.ones(8)))
    assert "excluded" in format_regression(res)


def test_rank_deficiency_leaves_out_independent_columns():
    rng = np.random.default_rng(15)
    a, c = rng.standard_normal(20), rng.standard_normal(20)
    with pytest.raises(RankDeficientError) as info:
        ols_fit(rng.standard_normal(20), np.column_stack([a, c, a - 3 * c, rng.standard_normal(20)]),
                names=["a", "c", "d", "e"])
    assert str(info.value).endswith("a, c, d")
