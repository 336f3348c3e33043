"""
# Sorter

Quantile portfolios on any signal of a `SignalPanel`.

A signal row stamped at t is known at the end of the formation period t-1.
Firms are bucketed on it, weighted (VW) by formation-period ME, and held
over periods t + holding_lag .. t + holding_lag + horizon - 1. Portfolio
series are indexed by the first holding period.

Breakpoints use numpy's default (inclusive linear interpolation) quantiles;
a value equal to a threshold goes to the lower bucket.

```python
from custmom.portfolios.sorter import BreakpointSpec, BreakpointUniverse, Weighting, form_portfolios

spec = BreakpointSpec(n_buckets=10, universe=BreakpointUniverse.POOLED, per_period=False)
deciles = form_portfolios(panel, signals, "cmom-1-1", spec, Weighting.EQUAL)
deciles.long_short.mean()
```
"""
import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Optional, Union

import numpy as np
import pandas as pd

from custmom.core.diagnostics import FlagLog
from custmom.core.exceptions import DegenerateBreakpointsError
from custmom.core.panel import NYSE, ReturnPanel
from custmom.processors.signal_lab import window_returns
from custmom.processors.signal_output import LagWindow, SignalPanel

logger = logging.getLogger(__name__)

ALLOWED_BUCKETS = (2, 3, 5, 10)
LONG_SHORT = "L/S"
PORTFOLIO_COLUMNS = ["date", "bucket", "ret", "count", "weighting", "signal_name", "n_buckets", "horizon"]


class BreakpointUniverse(str, Enum):
    FULL_SAMPLE = "full"
    NYSE_ONLY = "nyse"
    POOLED = "pooled"


class Weighting(str, Enum):
    EQUAL = "ew"
    VALUE = "vw"


@dataclass(frozen=True)
class BreakpointSpec:
    """
    How thresholds are formed.

    Attributes:
        n_buckets (int): One of 2, 3, 5, 10.
        universe (BreakpointUniverse): Firms whose values set the thresholds.
        per_period (bool): Thresholds per period, or once over all periods.
    """
    n_buckets: int = 10
    universe: BreakpointUniverse = BreakpointUniverse.POOLED
    per_period: bool = False

    def __post_init__(self):
        if self.n_buckets not in ALLOWED_BUCKETS:
            raise ValueError(f"n_buckets must be one of {ALLOWED_BUCKETS}, got {self.n_buckets}")
        object.__setattr__(self, "universe", BreakpointUniverse(self.universe))
        if self.universe is BreakpointUniverse.POOLED and self.per_period:
            raise ValueError("pooled breakpoints cannot be per period")

    @property
    def pooled(self) -> bool:
        return not self.per_period

    def describe(self) -> str:
        scope = "per period" if self.per_period else "pooled"
        return f"{self.n_buckets} buckets, {self.universe.value} universe, {scope}"


def compute_breakpoints(values: Iterable[float], spec: Union[BreakpointSpec, int]) -> np.ndarray:
    """
    Thresholds at quantiles i/n, i = 1..n-1.

    Raises:
        DegenerateBreakpointsError: Fewer than n distinct finite values.
    """
    n = spec.n_buckets if isinstance(spec, BreakpointSpec) else int(spec)
    values = np.asarray(list(values) if not isinstance(values, (np.ndarray, pd.Series)) else values, dtype="float64")
    values = values[np.isfinite(values)]
    distinct = np.unique(values).size
    if distinct < n:
        raise DegenerateBreakpointsError(f"degenerate breakpoints: {distinct} distinct values for {n} buckets",
                                         {"distinct": int(distinct), "n_buckets": int(n)})
    return np.quantile(values, np.arange(1, n) / n)


def assign_buckets(values: np.ndarray, thresholds: np.ndarray) -> np.ndarray:
    """1-based bucket numbers; values equal to a threshold take the lower bucket."""
    return np.searchsorted(thresholds, np.asarray(values, dtype="float64"), side="left") + 1


@dataclass
class PortfolioSeries:
    """
    Per-period bucket returns, the long-short leg and constituent counts.

    Attributes:
        signal_name (str): Sorting signal.
        weighting (Weighting): EW or VW.
        spec (BreakpointSpec): Breakpoint construction.
        returns (pd.DataFrame): index period, columns 1..n and "L/S".
        counts (pd.DataFrame): index period, columns 1..n.
        absent (list[int]): Periods with a signal but no valid portfolio.
        constituents (pd.DataFrame): firm_id, period, bucket, weight, ret.
    """
    signal_name: str
    weighting: Weighting
    spec: BreakpointSpec
    returns: pd.DataFrame
    counts: pd.DataFrame
    absent: list[int] = field(default_factory=list)
    constituents: pd.DataFrame = field(default_factory=pd.DataFrame)
    holding_lag: int = 0
    horizon: int = 1

    @property
    def n_buckets(self) -> int:
        return self.spec.n_buckets

    @property
    def long_short(self) -> pd.Series:
        return self.returns[LONG_SHORT]

    def bucket(self, i: int) -> pd.Series:
        return self.returns[i]

    def to_long(self, labels) -> pd.DataFrame:
        """
        Rows of (date, bucket, ret, count, weighting, signal_name, n_buckets,
        horizon); `n_buckets` and `horizon` tell apart sorts on one signal.
        """
        rows = []
        for period, row in self.returns.iterrows():
            for bucket in list(range(1, self.n_buckets + 1)) + [LONG_SHORT]:
                count = int(self.counts.loc[period, bucket]) if bucket != LONG_SHORT else \
                    int(self.counts.loc[period, [1, self.n_buckets]].sum())
                rows.append((labels(period), str(bucket), row.loc[bucket], count,
                             self.weighting.value, self.signal_name, self.n_buckets, self.horizon))
        return pd.DataFrame(rows, columns=PORTFOLIO_COLUMNS)


def _target_returns(panel: ReturnPanel, keys: pd.MultiIndex, holding_lag: int, horizon: int) -> np.ndarray:
    firms = keys.get_level_values(0)
    periods = keys.get_level_values(1).to_numpy()
    if horizon == 1:
        target = pd.MultiIndex.from_arrays([firms, periods + holding_lag])
        return panel.keyed["ret"].reindex(target).to_numpy()
    forward = window_returns(panel, LagWindow(horizon, 1))
    target = pd.MultiIndex.from_arrays([firms, periods + holding_lag + horizon])
    return forward.reindex(target).to_numpy()


def sort_frame(panel: ReturnPanel, signals: SignalPanel, signal_name: str,
               mask: Optional[pd.Series] = None, holding_lag: int = 0, horizon: int = 1) -> pd.DataFrame:
    """
    Firm-period rows ready for bucketing: firm_id, period (signal stamp),
    value, me (formation), nyse (formation), ret (holding window).
    """
    if holding_lag < 0 or horizon < 1:
        raise ValueError("holding_lag must be >= 0 and horizon >= 1")
    sig = signals.get(signal_name)
    if mask is not None:
        sig = sig[mask.reindex(sig.index, fill_value=False).to_numpy(dtype=bool)]
    keys = sig.index
    formation = pd.MultiIndex.from_arrays([keys.get_level_values(0), keys.get_level_values(1) - 1])
    keyed = panel.keyed
    frame = pd.DataFrame({
        "firm_id": keys.get_level_values(0).to_numpy(),
        "period": keys.get_level_values(1).to_numpy(dtype="int64"),
        "value": sig.to_numpy(),
        "me": keyed["me"].reindex(formation).to_numpy(),
        "nyse": (keyed["exch"].reindex(formation) == NYSE).to_numpy(),
        "ret": _target_returns(panel, keys, holding_lag, horizon),
    })
    return frame.sort_values(["period", "firm_id"], kind="mergesort").reset_index(drop=True)


def bucket_frame(frame: pd.DataFrame, spec: BreakpointSpec, flags: Optional[FlagLog] = None) -> np.ndarray:
    """Bucket number per row of a sort frame; 0 where the period has no valid breakpoints."""
    values = frame["value"].to_numpy()
    in_universe = frame["nyse"].to_numpy() if spec.universe is BreakpointUniverse.NYSE_ONLY \
        else np.ones(len(frame), dtype=bool)
    buckets = np.zeros(len(frame), dtype="int64")
    if spec.pooled:
        thresholds = compute_breakpoints(values[in_universe], spec)
        return assign_buckets(values, thresholds)
    for period, idx in frame.groupby("period", sort=True).indices.items():
        try:
            thresholds = compute_breakpoints(values[idx][in_universe[idx]], spec)
        except DegenerateBreakpointsError:
            if flags is not None:
                flags.add("sort: degenerate breakpoints", period)
            continue
        buckets[idx] = assign_buckets(values[idx], thresholds)
    return buckets


def portfolio_returns(frame: pd.DataFrame, buckets: np.ndarray, spec: BreakpointSpec, weighting: Weighting,
                      signal_name: str, holding_lag: int = 0, horizon: int = 1,
                      flags: Optional[FlagLog] = None) -> PortfolioSeries:
    """Aggregate bucketed rows into a PortfolioSeries."""
    weighting = Weighting(weighting)
    n = spec.n_buckets
    rows = frame.assign(bucket=buckets)
    n_signal = rows.groupby("period").size()
    usable = (rows["bucket"] > 0) & rows["ret"].notna()
    if weighting is Weighting.VALUE:
        usable &= rows["me"] > 0
    rows = rows[usable].copy()
    if weighting is Weighting.VALUE:
        rows["weight"] = rows["me"] / rows.groupby(["period", "bucket"])["me"].transform("sum")
    else:
        rows["weight"] = 1.0 / rows.groupby(["period", "bucket"])["ret"].transform("size")
    grouped = rows.groupby(["period", "bucket"])
    if weighting is Weighting.VALUE:
        bucket_ret = (rows["weight"] * rows["ret"]).groupby([rows["period"], rows["bucket"]]).sum()
    else:
        bucket_ret = grouped["ret"].mean()
    columns = list(range(1, n + 1))
    if rows.empty:
        returns = pd.DataFrame(columns=columns, dtype="float64")
        counts = pd.DataFrame(columns=columns, dtype="int64")
    else:
        returns = bucket_ret.unstack("bucket").reindex(columns=columns)
        counts = grouped.size().unstack("bucket").reindex(columns=columns).fillna(0).astype("int64")
    periods = n_signal.index
    returns = returns.reindex(periods)
    counts = counts.reindex(periods).fillna(0).astype("int64")

    valid = (counts >= 1).all(axis=1) & (n_signal.reindex(periods) >= n)
    absent = [int(p) for p in periods[~valid.to_numpy()]]
    if absent and flags is not None:
        for p in absent:
            flags.add(f"sort: absent period ({signal_name})", p)
    returns = returns[valid.to_numpy()].copy()
    counts = counts[valid.to_numpy()]
    returns[LONG_SHORT] = returns[n] - returns[1]
    shift = holding_lag
    returns.index = pd.Index(returns.index.to_numpy() + shift, name="period")
    counts.index = returns.index
    returns.columns.name = None
    counts.columns.name = None
    constituents = rows[["firm_id", "period", "bucket", "weight", "ret"]].reset_index(drop=True)
    return PortfolioSeries(signal_name, weighting, spec, returns, counts, absent, constituents,
                           holding_lag, horizon)


def form_portfolios(panel: ReturnPanel, signals: SignalPanel, signal_name: str,
                    spec: Optional[BreakpointSpec] = None, weighting: Union[Weighting, str] = Weighting.EQUAL,
                    holding_lag: int = 0, mask: Optional[pd.Series] = None, horizon: int = 1,
                    flags: Optional[FlagLog] = None) -> PortfolioSeries:
    """
    Single sort of `signal_name` into quantile buckets.

    Args:
        panel (ReturnPanel): Returns, ME and exchange tags.
        signals (SignalPanel): Must contain `signal_name`.
        spec (Optional[BreakpointSpec]): Defaults to pooled deciles.
        weighting (Weighting): EW or VW (formation-period ME).
        holding_lag (int): Extra periods between formation and holding.
        mask (Optional[pd.Series]): Boolean (firm_id, period) filter, e.g. from `restrict_by_ratio`.
        horizon (int): Holding window length; returns are compounded over it.
        flags (Optional[FlagLog]): Collects absent periods.

    Returns:
        PortfolioSeries: Defined periods only; the rest are listed in `absent`.
    """
    spec = spec or BreakpointSpec()
    frame = sort_frame(panel, signals, signal_name, mask, holding_lag, horizon)
    buckets = bucket_frame(frame, spec, flags)
    series = portfolio_returns(frame, buckets, spec, weighting, signal_name, holding_lag, horizon, flags)
    logger.debug(f"Sorted {signal_name} into {spec.describe()}: {len(series.returns)} periods")
    return series


@dataclass
class DoubleSortResult:
    """
    Inner-signal portfolios within each outer bucket.

    Attributes:
        outer_signal (str): Conditioning signal.
        inner_signal (str): Sorting signal inside each outer bucket.
        by_outer (dict[int, PortfolioSeries]): Outer bucket -> inner portfolios.
        low_minus_high (Optional[pd.Series]): L/S of outer bucket 1 minus L/S of the top outer bucket.
    """
    outer_signal: str
    inner_signal: str
    by_outer: dict[int, PortfolioSeries]
    low_minus_high: Optional[pd.Series] = None

    def long_short_table(self) -> pd.DataFrame:
        return pd.DataFrame({b: s.long_short for b, s in sorted(self.by_outer.items())})


def conditional_double_sort(panel: ReturnPanel, signals: SignalPanel, outer_signal: str, n_outer: int,
                            inner_signal: str, n_inner: int, weighting: Union[Weighting, str] = Weighting.EQUAL,
                            outer_spec: Optional[BreakpointSpec] = None,
                            inner_spec: Optional[BreakpointSpec] = None, holding_lag: int = 0,
                            horizon: int = 1, mask: Optional[pd.Series] = None,
                            low_minus_high: bool = False, flags: Optional[FlagLog] = None) -> DoubleSortResult:
    """
    Sort on `outer_signal` each period, then on `inner_signal` within each
    outer bucket. Only firm-periods with both signals take part. A period
    whose outer breakpoints are degenerate puts every firm in outer bucket 1.
    """
    outer_spec = outer_spec or BreakpointSpec(n_outer, BreakpointUniverse.FULL_SAMPLE, per_period=True)
    inner_spec = inner_spec or BreakpointSpec(n_inner, BreakpointUniverse.FULL_SAMPLE, per_period=True)
    if outer_spec.n_buckets != n_outer or inner_spec.n_buckets != n_inner:
        raise ValueError("bucket counts disagree with the breakpoint specs")
    frame = sort_frame(panel, signals, inner_signal, mask, holding_lag, horizon)
    outer_values = signals.get(outer_signal).reindex(pd.MultiIndex.from_arrays([frame["firm_id"], frame["period"]]))
    frame = frame.assign(outer=outer_values.to_numpy())
    frame = frame[frame["outer"].notna()].reset_index(drop=True)

    outer_frame = frame.assign(value=frame["outer"])
    if outer_spec.pooled:
        outer = bucket_frame(outer_frame, outer_spec, flags)
    else:
        outer = np.ones(len(frame), dtype="int64")
        in_universe = outer_frame["nyse"].to_numpy() if outer_spec.universe is BreakpointUniverse.NYSE_ONLY \
            else np.ones(len(frame), dtype=bool)
        values = outer_frame["value"].to_numpy()
        for period, idx in outer_frame.groupby("period", sort=True).indices.items():
            try:
                thresholds = compute_breakpoints(values[idx][in_universe[idx]], outer_spec)
            except DegenerateBreakpointsError:
                if flags is not None:
                    flags.add("double sort: degenerate outer breakpoints", period)
                continue
            outer[idx] = assign_buckets(values[idx], thresholds)

    by_outer: dict[int, PortfolioSeries] = {}
    for b in range(1, n_outer + 1):
        subset = frame[outer == b].reset_index(drop=True).drop(columns="outer")
        if subset.empty:
            continue
        try:
            buckets = bucket_frame(subset, inner_spec, flags)
        except DegenerateBreakpointsError:
            if flags is not None:
                flags.add("double sort: degenerate inner breakpoints", b)
            continue
        by_outer[b] = portfolio_returns(subset, buckets, inner_spec, weighting, inner_signal,
                                        holding_lag, horizon, flags)

    difference = None
    if low_minus_high and 1 in by_outer and n_outer in by_outer:
        low, high = by_outer[1].long_short, by_outer[n_outer].long_short
        common = low.index.intersection(high.index)
        difference = (low.loc[common] - high.loc[common]).rename("low-high")
    return DoubleSortResult(outer_signal, inner_signal, by_outer, difference)


def restrict_by_ratio(panel: ReturnPanel, aggregates: pd.DataFrame, max_rel_size: float) -> pd.Series:
    """
    Boolean mask over the panel's (firm_id, period) rows: True where the
    supplier's relative customer size in the formation period is below
    `max_rel_size`. An infinite bound keeps every row.
    """
    index = pd.MultiIndex.from_frame(panel.frame[["firm_id", "period"]])
    if np.isinf(max_rel_size):
        return pd.Series(True, index=index, name="mask")
    rel = aggregates.dropna(subset=["rel_size"])
    stamped = pd.Series(rel["rel_size"].to_numpy(),
                        index=pd.MultiIndex.from_arrays([rel["supplier_id"], rel["period"] + 1]))
    values = stamped.reindex(index)
    return pd.Series((values < max_rel_size).to_numpy(), index=index, name="mask")
