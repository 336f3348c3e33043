import pytest
import numpy as np
import pandas as pd

from custmom.core.panel import ReturnPanel
from custmom.core.periods import Frequency, PeriodIndex, TradingCalendar, month_ordinal
from custmom.data.store import coverage_report, filter_panel


@pytest.fixture
def panel():
    rows = []
    for year in (2000, 2001):
        for month in range(1, 13):
            rows.append(("A", month_ordinal(year, month), 0.01, 100.0))
            rows.append(("B", month_ordinal(year, month), 0.02, 300.0))
        rows.append(("C", month_ordinal(year, 6), 0.0, 600.0))
    return ReturnPanel(pd.DataFrame(rows, columns=["firm_id", "period", "ret", "me"]))


def test_filter_panel_is_inclusive(panel):
    subset = filter_panel(panel, "2000-06", "2000-08")
    assert sorted(subset.periods) == [month_ordinal(2000, m) for m in (6, 7, 8)]
    assert len(subset) == 7
    # the original is untouched
    assert len(panel) == 50


def test_filter_panel_accepts_period_index(panel):
    subset = filter_panel(panel, PeriodIndex.monthly("2001-12"), month_ordinal(2001, 12))
    assert len(subset) == 2


def test_filter_panel_empty_and_reversed(panel):
    empty = filter_panel(panel, "1990-01", "1990-12")
    assert len(empty) == 0
    assert "empty result" in empty.report.notes
    with pytest.raises(ValueError):
        filter_panel(panel, "2001-01", "2000-01")


def test_filter_daily_end_on_weekend():
    calendar = TradingCalendar(["2015-01-02", "2015-01-05", "2015-01-06"])
    daily = ReturnPanel(pd.DataFrame({"firm_id": ["A"] * 3, "period": [0, 1, 2], "ret": [0.01, 0.02, 0.03]}),
                        Frequency.DAILY, calendar)
    subset = filter_panel(daily, "2015-01-01", "2015-01-04")
    assert subset.frame["period"].tolist() == [0]


def test_coverage_report(panel):
    cover = coverage_report(panel, ["A", "C"], panel)
    assert cover["year"].tolist() == [2000, 2001]
    assert cover["n_linked"].tolist() == [2, 2]
    assert cover["n_universe"].tolist() == [3, 3]
    assert cover["frac_firms"].tolist() == pytest.approx([2 / 3, 2 / 3])
    # June market equity: (100 + 600) / 1000
    assert cover["frac_me"].tolist() == pytest.approx([0.7, 0.7])


def test_coverage_report_zero_universe():
    panel = ReturnPanel(pd.DataFrame({"firm_id": ["A"], "period": [month_ordinal(2000, 1)], "ret": [0.0]}))
    cover = coverage_report(panel, ["A"], panel)
    # no June market equity in the universe
    assert np.isnan(cover["frac_me"].iloc[0])
