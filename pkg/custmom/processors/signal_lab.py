"""
# Signal lab

Firm-level sorting characteristics.

- `window_return` / `window_returns`: compounded j-k window returns (price momentum).
- `compute_sue` / `sue_events`: standardized unexpected earnings per announcement.
- `compute_car3` / `car3_events`: three-day abnormal announcement return.
- `compute_nav` / `nav_signal`: supplier abnormal volume on the customer's announcement day.
- `standard_characteristics`: log(ME), log(B/M), OP.
- `earnings_signal`: stamps announcement-level values onto the monthly grid.

Every signal stamped at period t is computed from data dated strictly before t.
Absent values are returned as None (scalars) or left out (series); the reason
is counted in an optional `FlagLog`.

```python
from custmom.processors.signal_lab import window_returns
from custmom.processors.signal_output import LagWindow

mom = window_returns(panel, LagWindow(12, 2))   # Series indexed by (firm_id, period)
```
"""
import logging
from typing import Optional, Union

import numpy as np
import pandas as pd

from custmom.core.diagnostics import FlagLog
from custmom.core.panel import AnnouncementTable, LinkTable, MarketSeries, ReturnPanel
from custmom.core.periods import Frequency, PeriodIndex
from custmom.processors.signal_output import LagWindow, SignalPanel
from custmom.utils.numerical_properties import compound

logger = logging.getLogger(__name__)

SUE_MIN_ANNOUNCEMENTS = 6
SUE_CHANGES = 8
NAV_BASELINE = (60, 11)
NAV_MIN_BASELINE = 30
NAV_HOLD_DAYS = 63


def _flag(flags: Optional[FlagLog], reason: str, key: object) -> None:
    if flags is not None:
        flags.add(reason, key)


def window_return(series: pd.Series, t: Union[int, PeriodIndex], w: LagWindow) -> Optional[float]:
    """
    Compounded return over periods [t-j, t-k] of one firm.

    Args:
        series (pd.Series): Returns indexed by period ordinal.
        t (int | PeriodIndex): Current period.
        w (LagWindow): Window.

    Returns:
        Optional[float]: prod(1 + r) - 1, or None if any period of the window is missing.
    """
    t = t.ordinal if isinstance(t, PeriodIndex) else int(t)
    window = series.reindex(np.arange(t - w.j, t - w.k + 1))
    if window.isna().any():
        return None
    return compound(window.to_numpy())


def window_returns(panel: ReturnPanel, w: LagWindow) -> pd.Series:
    """
    `window_return` for every firm and every period of the panel at once,
    indexed by (firm_id, period). Compounding runs through log1p sums.
    """
    wide = panel.wide_returns
    logs = np.log1p(wide).rolling(w.length, min_periods=w.length).sum().shift(w.k)
    result = np.expm1(logs)
    long = result.reset_index().melt(id_vars="period", var_name="firm_id", value_name="value").dropna()
    return long.set_index(["firm_id", "period"])["value"].sort_index().rename(f"mom-{w.name}")


def _firm_sue(dates: pd.Series, eps: np.ndarray, flags: Optional[FlagLog], firm: str,
              positions: Optional[list[int]] = None, min_announcements: int = SUE_MIN_ANNOUNCEMENTS,
              n_changes: int = SUE_CHANGES) -> list[Optional[float]]:
    dates = pd.DatetimeIndex(dates)
    changes = np.full(len(eps), np.nan)
    changes[4:] = eps[4:] - eps[:-4]
    out: list[Optional[float]] = []
    for q in (range(len(eps)) if positions is None else positions):
        key = (firm, dates[q].date().isoformat())
        if q < 4:
            _flag(flags, "sue: no year-over-year change", key)
            out.append(None)
            continue
        window_start = dates[q] - pd.DateOffset(years=2)
        recent = int(((dates[: q + 1] > window_start)).sum())
        if recent < min_announcements:
            _flag(flags, "sue: fewer than 6 announcements in 2 years", key)
            out.append(None)
            continue
        last = changes[max(4, q - n_changes + 1): q + 1]
        if len(last) < 2:
            _flag(flags, "sue: too few changes", key)
            out.append(None)
            continue
        sd = float(np.std(last, ddof=1))
        if sd == 0.0:
            _flag(flags, "sue: degenerate dispersion", key)
            out.append(None)
            continue
        out.append(float(last[-1] / sd))
    return out


def compute_sue(announcements: AnnouncementTable, firm: str, t: int,
                flags: Optional[FlagLog] = None) -> Optional[float]:
    """
    SUE of the firm's t-th announcement (0-based, date order): the latest
    year-over-year EPS change divided by the sample standard deviation of
    the most recent eight such changes.

    Absent when there is no change four quarters back, when fewer than six
    announcements fall in the two years ending at the announcement, or when
    the changes have zero dispersion.
    """
    rows = announcements.for_firm(firm)
    if not 0 <= t < len(rows):
        raise IndexError(f"firm {firm} has {len(rows)} announcements, no index {t}")
    head = rows.iloc[: t + 1]
    return _firm_sue(head["announce_date"], head["eps"].to_numpy(), flags, str(firm), [t])[0]


def sue_events(announcements: AnnouncementTable, flags: Optional[FlagLog] = None) -> pd.DataFrame:
    """SUE for every announcement: firm_id, announce_date, sue (absent rows dropped)."""
    parts = []
    for firm, rows in announcements.frame.groupby("firm_id", sort=True):
        values = _firm_sue(rows["announce_date"], rows["eps"].to_numpy(), flags, firm)
        parts.append(rows[["firm_id", "announce_date"]].assign(sue=values))
    if not parts:
        return pd.DataFrame(columns=["firm_id", "announce_date", "sue"])
    out = pd.concat(parts, ignore_index=True)
    return out[out["sue"].notna()].astype({"sue": "float64"}).reset_index(drop=True)


def compute_car3(daily_panel: ReturnPanel, market: MarketSeries, announcement: tuple[str, object],
                 flags: Optional[FlagLog] = None) -> Optional[float]:
    """
    Firm minus market return summed over trading days d-1, d, d+1, where d
    is the announcement date shifted forward to the next trading day.
    """
    firm, date = str(announcement[0]), announcement[1]
    calendar = daily_panel.calendar
    d = calendar.shift_forward(date)
    if d is None:
        _flag(flags, "car3: announcement after calendar end", (firm, str(date)))
        return None
    if d - 1 < 0 or d + 1 >= len(calendar):
        _flag(flags, "car3: window outside calendar", (firm, str(date)))
        return None
    days = [d - 1, d, d + 1]
    ret = daily_panel.keyed["ret"]
    firm_r = [ret.get((firm, day), np.nan) for day in days]
    mkt_r = market.mkt_ret.reindex(days).to_numpy()
    if np.isnan(firm_r).any():
        _flag(flags, "car3: missing firm return", (firm, str(date)))
        return None
    if np.isnan(mkt_r).any():
        _flag(flags, "car3: missing market return", (firm, str(date)))
        return None
    return float((firm_r[0] + firm_r[1] + firm_r[2]) - (mkt_r[0] + mkt_r[1] + mkt_r[2]))


def car3_events(daily_panel: ReturnPanel, market: MarketSeries, announcements: AnnouncementTable,
                flags: Optional[FlagLog] = None) -> pd.DataFrame:
    """CAR3 for every announcement: firm_id, announce_date, event_day, car3 (absent rows dropped)."""
    calendar = daily_panel.calendar
    events = announcements.frame[["firm_id", "announce_date"]].copy()
    pos = calendar.dates.searchsorted(pd.DatetimeIndex(events["announce_date"]), side="left")
    events["event_day"] = pos.astype("int64")
    inside = (events["event_day"] >= 1) & (events["event_day"] + 1 < len(calendar))
    for _, row in events[~inside].iterrows():
        reason = "car3: announcement after calendar end" if row["event_day"] >= len(calendar) \
            else "car3: window outside calendar"
        _flag(flags, reason, (row["firm_id"], row["announce_date"].date().isoformat()))
    events = events[inside].reset_index(drop=True)

    ret = daily_panel.keyed["ret"]
    mkt = market.mkt_ret
    firm_sum = np.zeros(len(events))
    mkt_sum = np.zeros(len(events))
    for offset in (-1, 0, 1):
        days = events["event_day"].to_numpy() + offset
        firm_sum = firm_sum + ret.reindex(pd.MultiIndex.from_arrays([events["firm_id"], days])).to_numpy()
        mkt_sum = mkt_sum + mkt.reindex(days).to_numpy()
    events["car3"] = firm_sum - mkt_sum
    missing = events["car3"].isna()
    for _, row in events[missing].iterrows():
        _flag(flags, "car3: missing return", (row["firm_id"], row["announce_date"].date().isoformat()))
    return events[~missing].reset_index(drop=True)


def compute_nav(daily_panel: ReturnPanel, supplier: str, event_day: Union[int, PeriodIndex],
                flags: Optional[FlagLog] = None, baseline: tuple[int, int] = NAV_BASELINE,
                min_baseline: int = NAV_MIN_BASELINE) -> Optional[float]:
    """
    Normalized abnormal volume of `supplier` on `event_day`: log(1+V) on the
    day, standardized by the mean and sample std of log(1+V) over trading
    days [event-60, event-11].
    """
    d = event_day.ordinal if isinstance(event_day, PeriodIndex) else int(event_day)
    vol = daily_panel.keyed["vol"]
    key = (str(supplier), d)
    v_event = vol.get(key, np.nan)
    if pd.isna(v_event):
        _flag(flags, "nav: no event-day volume", key)
        return None
    days = np.arange(d - baseline[0], d - baseline[1] + 1)
    base = vol.reindex(pd.MultiIndex.from_arrays([np.repeat(str(supplier), len(days)), days])).dropna()
    if len(base) < min_baseline:
        _flag(flags, "nav: insufficient baseline", key)
        return None
    logs = np.log1p(base.to_numpy())
    sd = float(np.std(logs, ddof=1))
    if sd == 0.0:
        _flag(flags, "nav: degenerate dispersion", key)
        return None
    return float((np.log1p(v_event) - logs.mean()) / sd)


def nav_signal(daily_panel: ReturnPanel, links: LinkTable, announcements: AnnouncementTable,
               flags: Optional[FlagLog] = None, hold_days: int = NAV_HOLD_DAYS,
               unique_customer_only: bool = True) -> pd.Series:
    """
    Daily `nav` signal of suppliers, indexed by (firm_id, period).

    For every announcement of a linked customer (shifted to a trading day d)
    the supplier's NAV on d is attached to days d+1 .. d+hold_days, or up to
    and including the supplier's next event day if that comes first.
    """
    calendar = daily_panel.calendar
    edges = links.edges(Frequency.MONTHLY)
    if unique_customer_only:
        counts = edges.groupby(["supplier_id", "period"])["customer_id"].transform("size")
        edges = edges[counts == 1]
    events = announcements.frame[["firm_id", "announce_date"]].rename(columns={"firm_id": "customer_id"})
    events = events.assign(event_day=calendar.dates.searchsorted(pd.DatetimeIndex(events["announce_date"])))
    events = events[events["event_day"] < len(calendar)]
    events = events.assign(period=calendar.month_of(events["event_day"].to_numpy()))
    hits = events.merge(edges, on=["customer_id", "period"])[["supplier_id", "event_day"]]
    hits = hits.drop_duplicates().sort_values(["supplier_id", "event_day"], kind="mergesort")

    rows = []
    for supplier, group in hits.groupby("supplier_id", sort=True):
        days = group["event_day"].to_numpy()
        for i, d in enumerate(days):
            value = compute_nav(daily_panel, supplier, int(d), flags)
            if value is None:
                continue
            last = d + hold_days
            if i + 1 < len(days):
                last = min(last, days[i + 1])
            last = min(last, len(calendar) - 1)
            for day in range(int(d) + 1, int(last) + 1):
                rows.append((supplier, day, value))
    frame = pd.DataFrame(rows, columns=["firm_id", "period", "value"])
    return frame.set_index(["firm_id", "period"])["value"].sort_index().rename("nav")


def carry_forward(events: pd.DataFrame, horizon: int, lag: int = 1) -> pd.Series:
    """
    Spread point-in-time values onto the period grid.

    `events` has firm_id, period (when the value became known) and value. A
    value known at p is stamped on p+lag .. p+horizon, stopping at the
    firm's next value. Indexed by (firm_id, period).
    """
    if events.empty:
        return pd.Series(dtype="float64", index=pd.MultiIndex.from_arrays([[], []], names=["firm_id", "period"]))
    f = events.sort_values(["firm_id", "period"], kind="mergesort").drop_duplicates(["firm_id", "period"], keep="last")
    f = f.reset_index(drop=True)
    nxt = f.groupby("firm_id")["period"].shift(-1)
    start = f["period"].to_numpy() + lag
    end = f["period"].to_numpy() + horizon
    has_next = nxt.notna().to_numpy()
    end = np.where(has_next, np.minimum(end, nxt.fillna(0).to_numpy().astype("int64") + lag - 1), end)
    lengths = np.maximum(end - start + 1, 0)
    offsets = np.arange(lengths.sum()) - np.repeat(np.cumsum(lengths) - lengths, lengths)
    out = pd.DataFrame({
        "firm_id": np.repeat(f["firm_id"].to_numpy(), lengths),
        "period": (np.repeat(start, lengths) + offsets).astype("int64"),
        "value": np.repeat(f["value"].to_numpy(), lengths),
    })
    return out.set_index(["firm_id", "period"])["value"].sort_index()


def earnings_signal(events: pd.DataFrame, value_column: str, date_column: str,
                    carry_months: int) -> pd.Series:
    """
    Monthly signal from announcement-level values: stamped from the month
    after the announcement for `carry_months` months or until the next one.
    """
    dates = pd.DatetimeIndex(events[date_column])
    frame = pd.DataFrame({"firm_id": events["firm_id"].to_numpy(),
                          "period": (dates.year * 12 + dates.month - 1).to_numpy(dtype="int64"),
                          "value": events[value_column].to_numpy()})
    return carry_forward(frame, carry_months).rename(value_column)


def standard_characteristics(panel: ReturnPanel, book_equity: Optional[pd.DataFrame] = None,
                             profitability: Optional[pd.DataFrame] = None,
                             carry_months: int = 12) -> SignalPanel:
    """
    log(ME), log(B/M) and OP stamped on the period after they are observed.

    Args:
        panel (ReturnPanel): Source of market equity.
        book_equity (Optional[pd.DataFrame]): firm_id, period, value (book equity).
        profitability (Optional[pd.DataFrame]): firm_id, period, value (operating profitability).
        carry_months (int): How long accounting values stay in force.

    Returns:
        SignalPanel: rows for `log_me`, `log_bm`, `op`. Non-positive ME or B/M give no row.
    """
    last = int(panel.frame["period"].max()) if len(panel) else 0
    me = panel.frame[["firm_id", "period", "me"]]
    me = me[me["me"] > 0]
    log_me = pd.Series(np.log(me["me"].to_numpy()),
                       index=pd.MultiIndex.from_arrays([me["firm_id"], me["period"] + 1], names=["firm_id", "period"]))
    parts = [SignalPanel.from_series("log_me", log_me[log_me.index.get_level_values("period") <= last],
                                     panel.frequency)]
    if book_equity is not None:
        bm = book_equity.merge(me, on=["firm_id", "period"])
        bm = bm.assign(value=bm["value"] / bm["me"])
        bm = bm[bm["value"] > 0]
        bm = bm.assign(value=np.log(bm["value"].to_numpy()))
        log_bm = carry_forward(bm[["firm_id", "period", "value"]], carry_months)
        parts.append(SignalPanel.from_series("log_bm", log_bm[log_bm.index.get_level_values("period") <= last],
                                             panel.frequency))
    if profitability is not None:
        op = carry_forward(profitability[["firm_id", "period", "value"]], carry_months)
        parts.append(SignalPanel.from_series("op", op[op.index.get_level_values("period") <= last],
                                             panel.frequency))
    return SignalPanel.concat(parts)


def winsorize(signals: SignalPanel, p: Optional[float], names: Optional[list[str]] = None) -> SignalPanel:
    """Clip each named signal at its per-period p and 1-p quantiles. `p=None` returns the panel unchanged."""
    if p is None:
        return signals
    if not 0.0 < p < 0.5:
        raise ValueError(f"winsorization level must lie in (0, 0.5), got {p}")
    frame = signals.frame.copy()
    chosen = frame["signal"].isin(names if names is not None else signals.names)
    groups = frame[chosen].groupby(["signal", "period"])["value"]
    lo = groups.transform(lambda v: v.quantile(p))
    hi = groups.transform(lambda v: v.quantile(1.0 - p))
    frame.loc[chosen, "value"] = frame.loc[chosen, "value"].clip(lower=lo, upper=hi)
    return SignalPanel(frame, signals.frequency)
