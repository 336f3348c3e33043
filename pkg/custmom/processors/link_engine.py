"""
# Link engine

Turns reported supplier-customer relationships into dated links and
summarizes each supplier's customer portfolio.

```python
from custmom.processors.link_engine import lag_links, customer_aggregates, customer_momentum

links = lag_links(raw_links, lag_months=6)
aggregates = customer_aggregates(panel, links)
cmom = customer_momentum(panel, links, LagWindow(1, 1))
```
"""
import logging
from typing import Optional

import numpy as np
import pandas as pd

from custmom.core.panel import IngestReport, LinkTable, RawLinkTable, ReturnPanel
from custmom.processors.signal_lab import window_returns
from custmom.processors.signal_output import AGGREGATE_COLUMNS, LagWindow, SignalPanel

logger = logging.getLogger(__name__)

LINK_TIMINGS = ("formation", "holding")


def lag_links(raw: RawLinkTable, lag_months: int = 6, expiry_months: int = 12) -> LinkTable:
    """
    Date raw link reports.

    A report for fiscal year ending in month m becomes effective in month
    m + lag_months + 1 and stays effective for `expiry_months` months, cut
    short the month before the same pair's next report takes effect.

    Args:
        raw (RawLinkTable): Links stamped with fiscal-year-end months.
        lag_months (int): Reporting lag, default 6.
        expiry_months (int): Months a report stays in force without a successor.

    Returns:
        LinkTable: Non-overlapping windows per pair.
    """
    if lag_months < 0:
        raise ValueError(f"lag_months must be >= 0, got {lag_months}")
    if expiry_months < 1:
        raise ValueError(f"expiry_months must be >= 1, got {expiry_months}")
    f = raw.frame.sort_values(["supplier_id", "customer_id", "fy_end"], kind="mergesort").reset_index(drop=True)
    start = f["fy_end"] + lag_months + 1
    end = start + expiry_months - 1
    next_start = start.groupby([f["supplier_id"], f["customer_id"]]).shift(-1)
    end = np.where(next_start.notna(), np.minimum(end, next_start.fillna(0) - 1), end)
    frame = pd.DataFrame({"supplier_id": f["supplier_id"], "customer_id": f["customer_id"],
                          "effective_from": start.astype("int64"), "effective_to": end.astype("int64")})
    report = IngestReport(source=raw.report.source, n_rows=raw.report.n_rows, n_accepted=len(frame),
                          rejections=list(raw.report.rejections),
                          notes=raw.report.notes + [f"lag_months={lag_months} expiry_months={expiry_months}"])
    logger.info(f"Lagged {len(frame)} link reports by {lag_months} months")
    return LinkTable(frame, report)


def _edges(panel: ReturnPanel, links: LinkTable) -> pd.DataFrame:
    return links.edges(panel.frequency, panel.calendar)


def customer_aggregates(panel: ReturnPanel, links: LinkTable,
                        signals: Optional[SignalPanel] = None) -> pd.DataFrame:
    """
    One row per (supplier, period) with at least one active customer that
    has a return that period (see `CustomerAggregate`).

    `mean_cust_sue` / `mean_cust_car3` average the customers' `sue` / `car3`
    signals stamped at the same period, over customers that have them.
    `rel_size` is mean customer ME over supplier ME, present only when the
    supplier and every contributing customer have positive ME.
    """
    edges = _edges(panel, links)
    cust = panel.frame[["firm_id", "period", "ret", "me"]].rename(
        columns={"firm_id": "customer_id", "ret": "c_ret", "me": "c_me"})
    e = edges.merge(cust, on=["customer_id", "period"], how="inner")
    e = e[e["c_ret"].notna()]
    if signals is not None:
        for name in ("sue", "car3"):
            if name in signals:
                values = signals.get(name).rename(f"c_{name}").rename_axis(["customer_id", "period"]).reset_index()
                e = e.merge(values, on=["customer_id", "period"], how="left")
    for name in ("c_sue", "c_car3"):
        if name not in e:
            e[name] = np.nan
    e = e.sort_values(["supplier_id", "period", "customer_id"], kind="mergesort")
    e["c_me_pos"] = e["c_me"].where(e["c_me"] > 0)

    g = e.groupby(["supplier_id", "period"], sort=True)
    out = g.agg(cust_ret_ew=("c_ret", "mean"), n_customers=("c_ret", "size"),
                mean_cust_sue=("c_sue", "mean"), mean_cust_car3=("c_car3", "mean"),
                mean_cust_me=("c_me_pos", "mean"), n_me=("c_me_pos", "count")).reset_index()
    supplier_me = panel.frame[["firm_id", "period", "me"]].rename(columns={"firm_id": "supplier_id", "me": "s_me"})
    out = out.merge(supplier_me, on=["supplier_id", "period"], how="left")
    complete = (out["n_me"] == out["n_customers"]) & (out["s_me"] > 0)
    out["rel_size"] = np.where(complete, out["mean_cust_me"] / out["s_me"].where(out["s_me"] > 0), np.nan)
    out["n_customers"] = out["n_customers"].astype("int64")
    logger.info(f"Built {len(out)} customer aggregates for {out['supplier_id'].nunique()} suppliers")
    return out[AGGREGATE_COLUMNS].reset_index(drop=True)


def contemporaneous_link_correlation(panel: ReturnPanel, aggregates: pd.DataFrame) -> Optional[float]:
    """Pearson correlation of supplier returns with same-period customer-portfolio returns."""
    supplier = panel.frame[["firm_id", "period", "ret"]].rename(columns={"firm_id": "supplier_id"})
    pairs = aggregates.merge(supplier, on=["supplier_id", "period"]).dropna(subset=["ret", "cust_ret_ew"])
    return _pearson(pairs["ret"].to_numpy(), pairs["cust_ret_ew"].to_numpy())


def _pearson(x: np.ndarray, y: np.ndarray) -> Optional[float]:
    if len(x) < 2:
        raise ValueError(f"correlation needs at least 2 paired observations, got {len(x)}")
    if np.std(x) == 0.0 or np.std(y) == 0.0:
        return None
    return float(np.corrcoef(x, y)[0, 1])


def random_pair_correlation(panel: ReturnPanel, aggregates: pd.DataFrame, seed: int = 0) -> Optional[float]:
    """
    Benchmark for `contemporaneous_link_correlation`: each supplier-period's
    customer portfolio is replaced by the equal-weighted return of the same
    number of randomly drawn other firms from that period.
    """
    rng = np.random.default_rng(seed)
    by_period = {p: g for p, g in panel.frame[["firm_id", "period", "ret"]].groupby("period", sort=True)}
    supplier = panel.frame[["firm_id", "period", "ret"]].rename(columns={"firm_id": "supplier_id"})
    pairs = aggregates.merge(supplier, on=["supplier_id", "period"]).dropna(subset=["ret"])
    pairs = pairs.sort_values(["period", "supplier_id"])
    x, y = [], []
    for row in pairs.itertuples(index=False):
        pool = by_period[row.period]
        pool = pool[pool["firm_id"] != row.supplier_id]["ret"].dropna().to_numpy()
        if len(pool) < row.n_customers:
            continue
        x.append(row.ret)
        y.append(rng.choice(pool, size=int(row.n_customers), replace=False).mean())
    return _pearson(np.asarray(x), np.asarray(y))


def _formation_edges(panel: ReturnPanel, links: LinkTable, link_timing: str) -> pd.DataFrame:
    if link_timing not in LINK_TIMINGS:
        raise ValueError(f"link_timing must be one of {LINK_TIMINGS}, got {link_timing!r}")
    edges = _edges(panel, links)
    if link_timing == "formation":
        edges = edges.assign(period=edges["period"] + 1)
    return edges


def customer_momentum(panel: ReturnPanel, links: LinkTable, w: LagWindow,
                      link_timing: str = "formation") -> pd.Series:
    """
    `cmom-j-k` stamped at t: the equal-weighted mean over linked customers of
    each customer's compounded return over [t-j, t-k].

    Customers are those linked in the formation period t-1
    (`link_timing="formation"`) or in t (`"holding"`); customers without a
    complete window are left out.
    """
    edges = _formation_edges(panel, links, link_timing)
    wr = window_returns(panel, w).rename("c_win").rename_axis(["customer_id", "period"]).reset_index()
    e = edges.merge(wr, on=["customer_id", "period"]).sort_values(["supplier_id", "period", "customer_id"],
                                                                  kind="mergesort")
    last = int(panel.frame["period"].max()) if len(panel) else 0
    e = e[e["period"] <= last]
    out = e.groupby(["supplier_id", "period"], sort=True)["c_win"].mean()
    return out.rename_axis(["firm_id", "period"]).rename(f"cmom-{w.name}")


def _lagged_aggregate(aggregates: pd.DataFrame, column: str, name: str) -> pd.Series:
    rows = aggregates.dropna(subset=[column])
    index = pd.MultiIndex.from_arrays([rows["supplier_id"], rows["period"] + 1], names=["firm_id", "period"])
    return pd.Series(rows[column].to_numpy(), index=index, name=name).sort_index()


def customer_signal(aggregates: pd.DataFrame, name: str) -> pd.Series:
    """
    `cust_<name>` stamped at t: `mean_cust_<name>` of the supplier's aggregate
    at the formation period t-1. Feeds the `cust_sue` / `cust_car3` sorts.
    """
    column = f"mean_cust_{name}"
    if column not in aggregates:
        raise ValueError(f"aggregates carry no {column} column")
    return _lagged_aggregate(aggregates, column, f"cust_{name}")


def relative_size_signal(aggregates: pd.DataFrame) -> pd.Series:
    """`rel_size` stamped at t from the aggregate of the formation period t-1."""
    return _lagged_aggregate(aggregates, "rel_size", "rel_size")
