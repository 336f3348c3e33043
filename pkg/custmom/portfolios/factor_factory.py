"""
# Factor factory

2x3 size-by-signal factors and cumulative growth series.

Each period, NYSE firms set the size breakpoint (median formation ME) and
the signal breakpoints (30th and 70th percentiles); every firm with a
signal and positive ME is then placed in one of six cells and the cells are
value weighted. A signal value equal to either signal breakpoint is a middle
firm, so negating the signal mirrors cell membership exactly; a size equal
to the median is small. The factor is

    0.5 * (small high + big high) - 0.5 * (small low + big low)

```python
from custmom.portfolios.factor_factory import build_factor, growth_of_dollar

cmom = build_factor(panel, signals, "cmom-1-1", name="CMOM")
growth_of_dollar(cmom.returns)
```
"""
import logging
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import pandas as pd

from custmom.core.diagnostics import FlagLog
from custmom.core.panel import ReturnPanel
from custmom.portfolios.sorter import sort_frame
from custmom.processors.signal_output import SignalPanel

logger = logging.getLogger(__name__)

CELLS = ["SL", "SM", "SH", "BL", "BM", "BH"]
SIGNAL_PERCENTILES = (0.3, 0.7)


@dataclass
class FactorSeries:
    """
    A factor return series with its construction details.

    Attributes:
        name (str): Factor name, e.g. "CMOM".
        returns (pd.Series): Factor return per period.
        cells (pd.DataFrame): Value-weighted return of each of the six cells.
        metadata (dict): Signal, breakpoint universe and size split.
        absent (list[int]): Periods dropped for an empty cell or missing NYSE firms.
    """
    name: str
    returns: pd.Series
    cells: pd.DataFrame = field(default_factory=pd.DataFrame)
    metadata: dict = field(default_factory=dict)
    absent: list[int] = field(default_factory=list)


def _cell_labels(me: np.ndarray, value: np.ndarray, size_bp: float, low: float, high: float) -> np.ndarray:
    size = np.where(me <= size_bp, "S", "B")
    level = np.where(value < low, "L", np.where(value > high, "H", "M"))
    return np.char.add(size.astype(str), level.astype(str))


def build_factor(panel: ReturnPanel, signals: SignalPanel, signal_name: str, name: Optional[str] = None,
                 size_signal: Optional[str] = None, flags: Optional[FlagLog] = None) -> FactorSeries:
    """
    Build a 2x3 factor on `signal_name`.

    Args:
        panel (ReturnPanel): Returns, ME and exchange tags.
        signals (SignalPanel): Must contain `signal_name` (and `size_signal` if given).
        signal_name (str): Sorting signal.
        name (Optional[str]): Factor name; defaults to the signal name.
        size_signal (Optional[str]): Signal used for the size split instead of formation ME.
        flags (Optional[FlagLog]): Collects absent periods.

    Returns:
        FactorSeries: Defined on periods where all six cells are populated.
    """
    name = name or signal_name
    frame = sort_frame(panel, signals, signal_name)
    if size_signal is not None:
        size = signals.get(size_signal).reindex(pd.MultiIndex.from_arrays([frame["firm_id"], frame["period"]]))
        frame = frame.assign(size=size.to_numpy())
    else:
        frame = frame.assign(size=frame["me"])
    frame = frame[(frame["me"] > 0) & frame["size"].notna()].reset_index(drop=True)

    cell_rows, absent = [], []
    for period, group in frame.groupby("period", sort=True):
        nyse = group[group["nyse"]]
        if nyse.empty:
            absent.append(int(period))
            if flags is not None:
                flags.add(f"factor {name}: no NYSE firms", period)
            continue
        size_bp = float(np.quantile(nyse["size"].to_numpy(), 0.5))
        low, high = np.quantile(nyse["value"].to_numpy(), SIGNAL_PERCENTILES)
        labels = _cell_labels(group["size"].to_numpy(), group["value"].to_numpy(), size_bp, low, high)
        held = group.assign(cell=labels)
        held = held[held["ret"].notna()]
        weights = held["me"] / held.groupby("cell")["me"].transform("sum")
        cell_ret = (weights * held["ret"]).groupby(held["cell"]).sum()
        if any(c not in cell_ret.index for c in CELLS):
            absent.append(int(period))
            if flags is not None:
                flags.add(f"factor {name}: empty cell", period)
            continue
        cell_rows.append(cell_ret.reindex(CELLS).rename(int(period)))

    cells = pd.DataFrame(cell_rows, columns=CELLS)
    cells.index.name = "period"
    returns = 0.5 * (cells["SH"] + cells["BH"]) - 0.5 * (cells["SL"] + cells["BL"])
    logger.info(f"Built factor {name} on {signal_name}: {len(returns)} periods, {len(absent)} absent")
    metadata = {"signal": signal_name, "breakpoints": "NYSE", "size_split": "median",
                "signal_split": list(SIGNAL_PERCENTILES), "weighting": "vw",
                "size_signal": size_signal or "me"}
    return FactorSeries(name, returns.rename(name), cells, metadata, absent)


def scale_returns(returns: pd.Series, target_sd: float) -> pd.Series:
    """Rescale so the sample standard deviation equals `target_sd`."""
    sd = returns.std(ddof=1)
    if not np.isfinite(sd) or sd == 0.0:
        raise ValueError("cannot rescale a series with zero or undefined standard deviation")
    return returns * (target_sd / sd)


def growth_of_dollar(returns: pd.Series, scale_to_sd: Optional[float] = None,
                     flags: Optional[FlagLog] = None) -> pd.Series:
    """
    Cumulative value of one unit invested: prod(1 + r). With `scale_to_sd`
    the returns are first rescaled to that standard deviation. The series
    stops before the first period whose cumulative value would be <= 0.
    """
    r = returns.dropna()
    if scale_to_sd is not None:
        r = scale_returns(r, scale_to_sd)
    cumulative = (1.0 + r).cumprod()
    broken = np.flatnonzero(cumulative.to_numpy() <= 0.0)
    if broken.size:
        if flags is not None:
            flags.add("growth: truncated at non-positive value", returns.name)
        logger.warning(f"growth series {returns.name} truncated at period {cumulative.index[broken[0]]}")
        cumulative = cumulative.iloc[: broken[0]]
    return cumulative.rename(returns.name)
