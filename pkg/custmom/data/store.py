"""
Date-range filtering and sample-coverage diagnostics over ReturnPanels.
"""
import logging
from typing import Iterable, Union

import numpy as np
import pandas as pd

from custmom.core.panel import IngestReport, ReturnPanel
from custmom.core.periods import Frequency, PeriodIndex, parse_month

logger = logging.getLogger(__name__)

PeriodLike = Union[PeriodIndex, int, str]


def as_ordinal(value: PeriodLike, panel: ReturnPanel) -> int:
    """Resolve a PeriodIndex, raw ordinal or date label against a panel's frequency."""
    if isinstance(value, PeriodIndex):
        if value.frequency is not panel.frequency:
            raise ValueError(f"period frequency {value.frequency.value} does not match panel {panel.frequency.value}")
        return value.ordinal
    if isinstance(value, (int, np.integer)):
        return int(value)
    if panel.frequency is Frequency.MONTHLY:
        return parse_month(value)
    ordinal = panel.calendar.shift_forward(value)
    return len(panel.calendar) if ordinal is None else ordinal


def filter_panel(panel: ReturnPanel, start: PeriodLike, end: PeriodLike) -> ReturnPanel:
    """
    Rows with start <= period <= end, as a new panel. An empty result is
    allowed and noted in the returned panel's report.
    """
    lo, hi = as_ordinal(start, panel), as_ordinal(end, panel)
    if panel.frequency is Frequency.DAILY and isinstance(end, str):
        # a daily end label that is not a trading day closes at the prior trading day
        if panel.calendar.ordinal(end) is None:
            hi -= 1
    if lo > hi:
        raise ValueError(f"filter range is reversed: {start} > {end}")
    frame = panel.frame
    subset = frame[(frame["period"] >= lo) & (frame["period"] <= hi)]
    report = IngestReport(source=panel.report.source, n_rows=len(frame), n_accepted=len(subset),
                          notes=[f"filtered to periods {lo}..{hi}"])
    if subset.empty:
        report.notes.append("empty result")
        logger.warning(f"filter_panel: no observations between {start} and {end}")
    return panel.with_frame(subset, report)


def coverage_report(panel: ReturnPanel, linked: Iterable[str], universe: ReturnPanel) -> pd.DataFrame:
    """
    Per calendar year: distinct linked firms in `panel` that are also in the
    universe that year, distinct universe firms, their count ratio, and the
    ratio of June market equity (linked over universe).

    Args:
        panel (ReturnPanel): Study sample.
        linked (Iterable[str]): Firm ids that have customer links.
        universe (ReturnPanel): Reference universe (same frequency and calendar).

    Returns:
        pd.DataFrame: year, n_linked, n_universe, frac_firms, frac_me. Ratios
        with a zero denominator are NaN.
    """
    if panel.frequency is not universe.frequency or panel.calendar != universe.calendar:
        raise ValueError("coverage_report needs panels with the same frequency and calendar")
    linked = set(str(f) for f in linked)

    uni = universe.frame.assign(year=universe.year_of(universe.frame["period"]),
                                month=universe.month_of(universe.frame["period"]) % 12 + 1)
    sample = panel.frame.assign(year=panel.year_of(panel.frame["period"]))
    sample = sample[sample["firm_id"].isin(linked)][["firm_id", "year"]].drop_duplicates()
    uni_firms = uni[["firm_id", "year"]].drop_duplicates()
    covered = sample.merge(uni_firms, on=["firm_id", "year"])

    june = uni[(uni["month"] == 6) & uni["me"].notna()].sort_values(["firm_id", "period"])
    june = june.groupby(["firm_id", "year"], sort=True)["me"].last().reset_index()
    june["linked"] = june.merge(covered.assign(hit=True), on=["firm_id", "year"], how="left")["hit"].notna().to_numpy()

    years = np.sort(uni_firms["year"].unique())
    n_universe = uni_firms.groupby("year").size().reindex(years, fill_value=0)
    n_linked = covered.groupby("year").size().reindex(years, fill_value=0)
    me_total = june.groupby("year")["me"].sum().reindex(years, fill_value=0.0)
    me_linked = june[june["linked"]].groupby("year")["me"].sum().reindex(years, fill_value=0.0)

    out = pd.DataFrame({
        "year": years.astype(int),
        "n_linked": n_linked.to_numpy().astype(int),
        "n_universe": n_universe.to_numpy().astype(int),
    })
    out["frac_firms"] = np.where(out["n_universe"] > 0, out["n_linked"] / out["n_universe"].where(out["n_universe"] > 0), np.nan)
    denom = me_total.to_numpy()
    out["frac_me"] = np.divide(me_linked.to_numpy(), denom, out=np.full(len(years), np.nan), where=denom > 0)
    return out
