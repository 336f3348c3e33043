import pytest
import numpy as np
import pandas as pd

from custmom.core.diagnostics import FlagLog
from custmom.core.panel import AnnouncementTable, LinkTable, MarketSeries, ReturnPanel
from custmom.core.periods import Frequency, TradingCalendar, month_ordinal
from custmom.processors.signal_lab import (car3_events, compute_car3, compute_nav, compute_sue, earnings_signal,
                                           nav_signal, standard_characteristics, sue_events, window_return,
                                           window_returns, winsorize)
from custmom.processors.signal_output import LagWindow, SignalPanel


def quarterly(firm, eps, start="2000-01-15", months=3):
    dates = [pd.Timestamp(start) + pd.DateOffset(months=months * q) for q in range(len(eps))]
    return pd.DataFrame({"firm_id": firm, "announce_date": dates, "eps": eps})


@pytest.fixture
def daily():
    calendar = TradingCalendar(pd.bdate_range("2015-01-01", periods=80))
    days = np.arange(80)
    frame = pd.DataFrame({
        "firm_id": ["S"] * 80 + ["C"] * 80,
        "period": np.concatenate([days, days]),
        "ret": np.concatenate([np.full(80, 0.01), np.full(80, 0.02)]),
        "vol": np.concatenate([np.where(days % 2 == 0, 100.0, 200.0), np.full(80, 50.0)]),
    })
    frame.loc[(frame["firm_id"] == "S") & (frame["period"] == 70), "vol"] = 1000.0
    panel = ReturnPanel(frame, Frequency.DAILY, calendar)
    market = MarketSeries(pd.DataFrame({"mkt_ret": np.full(80, 0.005), "rf": 0.0}, index=days),
                          Frequency.DAILY, calendar)
    return panel, market


def test_lag_window_parse():
    w = LagWindow.parse("12-2")
    assert (w.j, w.k, w.length) == (12, 2, 11)
    with pytest.raises(ValueError):
        LagWindow.parse("2-12")
    with pytest.raises(ValueError):
        LagWindow.parse("twelve")


def test_window_return_compounds():
    series = pd.Series([0.1, 0.2, -0.1, 0.05, 0.0])
    assert window_return(series, 3, LagWindow(3, 2)) == pytest.approx(1.1 * 1.2 - 1)
    assert window_return(series, 4, LagWindow(1, 1)) == pytest.approx(0.05)
    # the window reaches before the first observation
    assert window_return(series, 3, LagWindow(12, 2)) is None


def test_window_returns_match_scalar_version():
    rets = [0.02, -0.01, 0.03, np.nan, 0.01, 0.04, -0.02, 0.05]
    frame = pd.DataFrame({"firm_id": "A", "period": np.arange(len(rets)), "ret": rets}).dropna()
    panel = ReturnPanel(frame)
    w = LagWindow(3, 2)
    series = panel.frame.set_index("period")["ret"]
    bulk = window_returns(panel, w)
    for t in range(len(rets)):
        expected = window_return(series, t, w)
        if expected is None:
            assert ("A", t) not in bulk.index
        else:
            assert bulk[("A", t)] == pytest.approx(expected, rel=1e-12)


def test_sue_standardizes_by_recent_changes():
    table = AnnouncementTable(quarterly("A", [1.0, 1.0, 1.0, 1.0, 1.5, 2.0]))
    flags = FlagLog()
    assert compute_sue(table, "A", 3, flags) is None
    assert compute_sue(table, "A", 4, flags) is None
    assert compute_sue(table, "A", 5, flags) == pytest.approx(2 * np.sqrt(2))
    assert flags.counts["sue: no year-over-year change"] == 1
    assert flags.counts["sue: too few changes"] == 1
    with pytest.raises(IndexError):
        compute_sue(table, "A", 6)


def test_sue_absent_cases():
    flags = FlagLog()
    sparse = AnnouncementTable(quarterly("A", [1.0, 1.1, 1.5, 1.2, 2.0, 1.9], months=6))
    assert compute_sue(sparse, "A", 5, flags) is None
    assert flags.counts["sue: fewer than 6 announcements in 2 years"] == 1
    flat = AnnouncementTable(quarterly("B", [float(q) for q in range(7)]))
    assert compute_sue(flat, "B", 6, flags) is None
    assert flags.counts["sue: degenerate dispersion"] == 1


def test_sue_events_and_carry():
    table = AnnouncementTable(quarterly("A", [1.0, 1.0, 1.0, 1.0, 1.5, 2.0]))
    events = sue_events(table)
    assert len(events) == 1
    assert events["announce_date"].iloc[0] == pd.Timestamp("2001-04-15")

    events = pd.DataFrame({"firm_id": ["A", "A"],
                           "announce_date": pd.to_datetime(["2000-02-10", "2000-04-20"]),
                           "sue": [1.5, -1.0]})
    stamped = earnings_signal(events, "sue", "announce_date", carry_months=3)
    months = [month_ordinal(2000, m) for m in (3, 4, 5, 6, 7)]
    assert stamped.loc["A"].reindex(months).tolist() == [1.5, 1.5, -1.0, -1.0, -1.0]
    assert month_ordinal(2000, 8) not in stamped.loc["A"].index


def test_car3_shifts_to_trading_day(daily):
    panel, market = daily
    flags = FlagLog()
    # a Saturday announcement is treated as the following Monday
    saturday = panel.calendar.dates[1] + pd.Timedelta(days=1)
    assert saturday.dayofweek == 5
    assert compute_car3(panel, market, ("C", saturday), flags) == pytest.approx(3 * 0.02 - 3 * 0.005)
    assert compute_car3(panel, market, ("C", panel.calendar.dates[0]), flags) is None
    assert compute_car3(panel, market, ("C", "2016-01-01"), flags) is None
    assert flags.counts["car3: window outside calendar"] == 1
    assert flags.counts["car3: announcement after calendar end"] == 1


def test_car3_events_match_scalar(daily):
    panel, market = daily
    table = AnnouncementTable(pd.DataFrame({"firm_id": ["S", "C", "C"],
                                            "announce_date": [panel.calendar.dates[10], panel.calendar.dates[0],
                                                              panel.calendar.dates[40]],
                                            "eps": [1.0, 1.0, 1.0]}))
    events = car3_events(panel, market, table)
    assert events["firm_id"].tolist() == ["C", "S"]
    assert events.set_index("firm_id")["car3"].to_dict() == pytest.approx({"C": 0.045, "S": 0.015})


def test_compute_nav(daily):
    panel, _ = daily
    base = np.log1p(np.where(np.arange(10, 60) % 2 == 0, 100.0, 200.0))
    expected = (np.log1p(1000.0) - base.mean()) / base.std(ddof=1)
    assert compute_nav(panel, "S", 70) == pytest.approx(expected)
    flags = FlagLog()
    assert compute_nav(panel, "S", 35, flags) is None
    assert compute_nav(panel, "C", 70, flags) is None
    assert flags.counts["nav: insufficient baseline"] == 1
    assert flags.counts["nav: degenerate dispersion"] == 1


def test_nav_signal_holds_after_event(daily):
    panel, _ = daily
    links = LinkTable(pd.DataFrame({"supplier_id": ["S"], "customer_id": ["C"],
                                    "effective_from": [month_ordinal(2015, 1)],
                                    "effective_to": [month_ordinal(2015, 12)]}))
    table = AnnouncementTable(pd.DataFrame({"firm_id": ["C"], "announce_date": [panel.calendar.dates[70]],
                                            "eps": [1.0]}))
    nav = nav_signal(panel, links, table)
    assert nav.index.get_level_values("period").tolist() == list(range(71, 80))
    assert nav.iloc[0] == pytest.approx(compute_nav(panel, "S", 70))


def test_standard_characteristics():
    june, july = month_ordinal(2000, 6), month_ordinal(2000, 7)
    panel = ReturnPanel(pd.DataFrame({"firm_id": "A", "period": np.arange(june, june + 4),
                                      "ret": 0.0, "me": [100.0, 110.0, 120.0, 130.0]}))
    book = pd.DataFrame({"firm_id": ["A"], "period": [june], "value": [50.0]})
    prof = pd.DataFrame({"firm_id": ["A"], "period": [june], "value": [0.2]})
    chars = standard_characteristics(panel, book, prof)
    assert chars.names == ["log_bm", "log_me", "op"]
    assert chars.get("log_me")[("A", july)] == pytest.approx(np.log(100.0))
    assert chars.get("log_bm")[("A", july + 2)] == pytest.approx(np.log(0.5))
    assert chars.get("op")[("A", july)] == pytest.approx(0.2)
    # nothing is stamped past the panel's last period
    assert chars.frame["period"].max() == june + 3


def test_winsorize_clips_per_period():
    frame = pd.DataFrame({"firm_id": list("ABCDE"), "period": 1, "signal": "x",
                          "value": [1.0, 2.0, 3.0, 4.0, 100.0]})
    signals = SignalPanel(frame)
    assert winsorize(signals, None) is signals
    clipped = winsorize(signals, 0.25)
    assert clipped.get("x").tolist() == [2.0, 2.0, 3.0, 4.0, 4.0]
    with pytest.raises(ValueError):
        winsorize(signals, 0.6)


def test_signal_panel_long_export():
    june = month_ordinal(2000, 6)
    panel = ReturnPanel(pd.DataFrame({"firm_id": "A", "period": [june, june + 1], "ret": 0.0}))
    signals = SignalPanel(pd.DataFrame({"firm_id": ["B", "A", "A"], "period": [june, june + 1, june],
                                        "signal": ["x", "x", "y"], "value": [1.0, 2.0, np.inf]}))
    out = signals.to_long(panel.labels)
    assert list(out.columns) == ["firm_id", "date", "signal", "value"]
    assert out.values.tolist() == [["A", "2000-07", "x", 2.0], ["B", "2000-06", "x", 1.0]]
