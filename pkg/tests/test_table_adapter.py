import pytest
import numpy as np
import pandas as pd

from custmom.adapters.table_adapter import ReportTable, TableAdapter
from custmom.econometrics.descriptive import correlation_matrix, summary_stats
from custmom.econometrics.regression import CovSpec, ols
from custmom.portfolios.sorter import LONG_SHORT, BreakpointSpec, DoubleSortResult, PortfolioSeries, Weighting


def portfolio(columns, n):
    returns = pd.DataFrame(columns, index=[1, 2])
    counts = pd.DataFrame({b: [3, 3] for b in range(1, n + 1)}, index=[1, 2])
    return PortfolioSeries("cmom-1-1", Weighting.EQUAL, BreakpointSpec(n), returns, counts)


@pytest.fixture
def two_buckets():
    # bucket 1: mean 2%, t 2; bucket 2: mean 3%, t 3; constant long-short
    return portfolio({1: [0.01, 0.03], 2: [0.02, 0.04], LONG_SHORT: [0.01, 0.01]}, 2)


def test_sort_table_layout(two_buckets):
    table = TableAdapter().sort_table("cmom sorts", {"1-1": two_buckets}, CovSpec.plain())
    assert list(table.frame.columns) == ["lag", "statistic", "D1", "D2", LONG_SHORT]
    assert table.frame.iloc[0].tolist() == ["1-1", "mean (%)", "2.00**", "3.00***", "1.00"]
    assert table.frame.iloc[1].tolist() == ["", "t", "[2.00]", "[3.00]", ""]
    assert table.data["1-1"]["buckets"]["1"]["mean"] == pytest.approx(0.02)
    assert table.data["1-1"]["mean_firms"] == 6.0
    assert table.notes == ["t-statistics: OLS"]


def test_sort_table_pads_shorter_rows(two_buckets):
    three = portfolio({1: [0.0, 0.0], 2: [0.01, 0.01], 3: [0.02, 0.02], LONG_SHORT: [0.02, 0.02]}, 3)
    table = TableAdapter().sort_table("mixed", {"a": two_buckets, "b": three}, CovSpec.plain())
    assert list(table.frame.columns) == ["lag", "statistic", "D1", "D2", "D3", LONG_SHORT]
    assert table.frame.iloc[0, 4] == ""
    assert table.frame.iloc[0, 5] == "1.00"


def test_markdown_rendering(two_buckets):
    table = TableAdapter().sort_table("cmom sorts", {"1-1": two_buckets}, CovSpec.plain())
    text = table.to_markdown()
    assert text.startswith("### cmom sorts\n")
    assert "| lag | statistic | D1 | D2 | L/S |" in text
    assert "| 1-1 | mean (%) | 2.00** | 3.00*** | 1.00 |" in text
    assert text.rstrip().endswith("_t-statistics: OLS_")


def test_double_sort_adds_low_high_row(two_buckets):
    result = DoubleSortResult("rel_size", "cmom-1-1", {1: two_buckets, 2: two_buckets},
                              low_minus_high=pd.Series([0.01, 0.03], index=[1, 2]))
    table = TableAdapter().double_sort_table("within size", result, CovSpec.plain())
    labels = table.frame["rel_size"].tolist()
    assert labels == ["rel_size Q1", "", "rel_size Q2", "", "low-high", ""]
    assert table.frame.iloc[4].tolist() == ["low-high", "mean (%)", "", "", "2.00**"]
    assert table.data["low-high"]["t"] == pytest.approx(2.0)


def test_regression_table():
    rng = np.random.default_rng(1)
    X = pd.DataFrame({"MKT-RF": rng.normal(size=60)})
    y = pd.Series(0.01 + 0.5 * X["MKT-RF"] + rng.normal(scale=0.1, size=60), name="CMOM")
    reports = {"CAPM": ols(y, X, CovSpec.newey_west(2))}
    table = TableAdapter().regression_table("Spanning", reports)
    assert table.frame["regressor"].tolist() == ["alpha (%)", "", "MKT-RF", "", "R2 adj", "N"]
    assert table.frame.loc[5, "CAPM"] == "60"
    assert table.notes == ["t-statistics: NW(lags=2)"]
    assert table.data["CAPM"]["nobs"] == 60


def test_summary_and_correlation_tables():
    rng = np.random.default_rng(2)
    frame = pd.DataFrame({"CMOM": rng.normal(0.01, 0.03, 48), "UMD": rng.normal(0.005, 0.04, 48)})
    adapter = TableAdapter()
    summary = adapter.summary_table("Summary", summary_stats(frame, nw_lags=0))
    assert summary.frame["series"].tolist() == ["CMOM", "UMD"]
    assert summary.frame["n"].tolist() == ["48", "48"]
    assert summary.frame.loc[0, "sd"] == f"{frame['CMOM'].std(ddof=1) * 100:.2f}"

    corr = adapter.correlation_table("Correlations", correlation_matrix(frame))
    assert list(corr.frame.columns) == ["series", "CMOM", "UMD"]
    assert corr.frame.loc[0, "UMD"] == ""
    assert corr.notes == ["stars at p < 0.1, 0.01, 0.001"]
    assert corr.data["n"]["CMOM"]["UMD"] == 48


def test_coverage_table():
    coverage = pd.DataFrame({"year": [1990], "n_linked": [5], "n_universe": [20], "frac_firms": [0.25],
                             "frac_me": [0.4]})
    table = TableAdapter().coverage_table("Coverage", coverage, {"linked": 0.123, "random": None})
    assert table.frame.iloc[0].tolist() == ["1990", "5", "20", "25.00", "40.00"]
    assert table.notes == ["return correlation: linked 0.12"]


def test_report_table_defaults():
    table = ReportTable("k", "Title", pd.DataFrame({"a": ["1"]}))
    assert table.data == {}
    assert table.to_markdown() == "### Title\n\n| a |\n|---|\n| 1 |\n"
