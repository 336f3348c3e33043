import pytest
import numpy as np
import pandas as pd

from custmom.core.exceptions import InsufficientObservationsError
from custmom.econometrics.descriptive import SUMMARY_COLUMNS, correlation_matrix, sharpe_ratio, summary_stats
from custmom.utils.numerical_properties import compound, format_number, format_tstat, significance_stars


def standardized(n, seed):
    z = np.random.default_rng(seed).normal(size=n)
    return (z - z.mean()) / z.std(ddof=1)


def test_sharpe_from_monthly_percent():
    # mean 1.06% and sd 6.95% per month: 1.06 / 6.95 * sqrt(12) = 0.528, which is
    # sometimes printed as 0.54 when rounded from less precise inputs
    series = pd.Series(1.06 + 6.95 * standardized(240, 1))
    assert series.mean() == pytest.approx(1.06)
    assert sharpe_ratio(series) == pytest.approx(0.53, abs=5e-3)
    assert np.isnan(sharpe_ratio(pd.Series([0.01, 0.01, 0.01])))


def test_summary_stats_columns():
    frame = pd.DataFrame({"CMOM": 0.01 + 0.03 * standardized(120, 2), "UMD": 0.005 + 0.04 * standardized(120, 3)})
    stats = summary_stats(frame, nw_lags=0)
    assert list(stats.columns) == SUMMARY_COLUMNS
    assert list(stats.index) == ["CMOM", "UMD"]
    assert stats.loc["CMOM", "mean"] == pytest.approx(0.01)
    assert stats.loc["CMOM", "sd"] == pytest.approx(0.03)
    assert stats.loc["CMOM", "p50"] == pytest.approx(frame["CMOM"].median())
    assert stats.loc["CMOM", "t"] == pytest.approx(stats.loc["CMOM", "mean"] / stats.loc["CMOM", "se"])
    assert stats.loc["UMD", "n"] == 120


def test_summary_stats_rejects_short_series():
    with pytest.raises(InsufficientObservationsError):
        summary_stats(pd.DataFrame({"x": [0.01, np.nan]}))
    assert summary_stats(pd.DataFrame()).empty


def test_correlation_matrix():
    rng = np.random.default_rng(4)
    a = rng.normal(size=200)
    frame = pd.DataFrame({"a": a, "b": a + rng.normal(scale=0.5, size=200), "c": rng.normal(size=200)})
    frame.loc[:9, "c"] = np.nan
    matrix = correlation_matrix(frame)
    assert matrix.rho.loc["a", "a"] == 1.0
    assert matrix.rho.loc["a", "b"] == pytest.approx(np.corrcoef(frame["a"], frame["b"])[0, 1])
    assert matrix.n.loc["a", "c"] == 190
    assert matrix.stars("a", "b") == "***"
    lower = matrix.lower()
    assert lower.loc["a", "b"] == ""
    assert lower.loc["b", "a"].endswith("***")
    assert lower.loc["a", "a"] == "1.00"


def test_correlation_p_value_matches_t_test():
    from scipy import stats
    x = pd.Series([0.1, 0.4, 0.2, 0.5, 0.3, 0.6, 0.2, 0.1])
    y = pd.Series([0.2, 0.1, 0.4, 0.3, 0.2, 0.5, 0.1, 0.3])
    matrix = correlation_matrix(pd.DataFrame({"x": x, "y": y}))
    expected = stats.pearsonr(x, y)[1]
    assert matrix.pvalues.loc["x", "y"] == pytest.approx(expected)


def test_numeric_helpers():
    assert compound([0.1, 0.1]) == pytest.approx(0.21)
    assert significance_stars(0.004) == "***"
    assert significance_stars(0.03) == "**"
    assert significance_stars(0.0005, (0.001, 0.01, 0.10)) == "***"
    assert significance_stars(0.005, (0.001, 0.01, 0.10)) == "**"
    assert significance_stars(float("nan")) == ""
    assert format_number(-0.001) == "0.00"
    assert format_number(None) == ""
    assert format_number(0.0123, 2, 100) == "1.23"
    assert format_tstat(2.876) == "[2.88]"
