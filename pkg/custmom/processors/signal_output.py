"""
Containers for what the processors emit: lag windows, per-supplier customer
aggregates and the long-form SignalPanel.
"""
import logging
from dataclasses import dataclass, field, fields
from typing import Callable, Iterable, Optional

import numpy as np
import pandas as pd

from custmom.core.periods import Frequency

logger = logging.getLogger(__name__)

SIGNAL_COLUMNS = ["firm_id", "period", "signal", "value"]


@dataclass(frozen=True)
class LagWindow:
    """
    Return window from t-j through t-k inclusive ("12-2" skips the most
    recent period).
    """
    j: int
    k: int

    def __post_init__(self):
        if int(self.k) < 1 or int(self.j) < int(self.k):
            raise ValueError(f"lag window needs j >= k >= 1, got {self.j}-{self.k}")

    @classmethod
    def parse(cls, text: str) -> "LagWindow":
        try:
            j, k = (int(part) for part in str(text).strip().split("-"))
        except ValueError:
            raise ValueError(f"lag window must look like 'j-k', got {text!r}") from None
        return cls(j, k)

    @property
    def name(self) -> str:
        return f"{self.j}-{self.k}"

    @property
    def length(self) -> int:
        return self.j - self.k + 1

    def __str__(self) -> str:
        return self.name


@dataclass
class CustomerAggregate:
    """One supplier-period summary of the supplier's linked customers."""
    supplier_id: str
    period: int
    cust_ret_ew: float
    n_customers: int
    mean_cust_sue: Optional[float] = field(default=None)
    mean_cust_car3: Optional[float] = field(default=None)
    rel_size: Optional[float] = field(default=None)


AGGREGATE_COLUMNS = [f.name for f in fields(CustomerAggregate)]


def aggregates_to_long(frame: pd.DataFrame, labels: Callable) -> pd.DataFrame:
    """Aggregate rows for export, with `period` replaced by its `date` label."""
    out = frame[AGGREGATE_COLUMNS].copy()
    out.insert(1, "date", labels(out.pop("period")))
    return out.reset_index(drop=True)


@dataclass
class SignalPanel:
    """
    Long-form named signals: (firm_id, period, signal, value).

    A row stamped at period t only uses information dated before t.
    Non-finite values are dropped on construction; keys are unique.
    """
    frame: pd.DataFrame = field(default_factory=lambda: pd.DataFrame(columns=SIGNAL_COLUMNS))
    frequency: Frequency = Frequency.MONTHLY

    def __post_init__(self):
        frame = self.frame[SIGNAL_COLUMNS].copy()
        frame["firm_id"] = frame["firm_id"].astype(str)
        frame["period"] = frame["period"].astype("int64")
        frame["signal"] = frame["signal"].astype(str)
        frame["value"] = frame["value"].astype("float64")
        finite = np.isfinite(frame["value"].to_numpy())
        if not finite.all():
            logger.debug(f"dropping {int((~finite).sum())} non-finite signal values")
            frame = frame[finite]
        if frame.duplicated(["firm_id", "period", "signal"]).any():
            raise ValueError("(firm_id, period, signal) must be unique in a SignalPanel")
        self.frame = frame.sort_values(["firm_id", "period", "signal"], kind="mergesort").reset_index(drop=True)

    @classmethod
    def from_series(cls, name: str, series: pd.Series,
                    frequency: Frequency = Frequency.MONTHLY) -> "SignalPanel":
        """Build from a Series indexed by (firm_id, period)."""
        frame = series.rename("value").reset_index()
        frame.columns = ["firm_id", "period", "value"]
        frame["signal"] = name
        return cls(frame, frequency)

    @classmethod
    def concat(cls, panels: Iterable["SignalPanel"]) -> "SignalPanel":
        panels = list(panels)
        if not panels:
            return cls()
        frequencies = {p.frequency for p in panels}
        if len(frequencies) > 1:
            raise ValueError("cannot combine signal panels of different frequencies")
        return cls(pd.concat([p.frame for p in panels], ignore_index=True), panels[0].frequency)

    def __len__(self) -> int:
        return len(self.frame)

    def __contains__(self, name: str) -> bool:
        return name in self.names

    @property
    def names(self) -> list[str]:
        return sorted(self.frame["signal"].unique())

    def get(self, name: str) -> pd.Series:
        """Values of one signal indexed by (firm_id, period)."""
        if name not in self.names:
            raise KeyError(f"signal {name!r} not in panel (have {self.names})")
        rows = self.frame[self.frame["signal"] == name]
        return rows.set_index(["firm_id", "period"])["value"].rename(name)

    def wide(self, names: Iterable[str]) -> pd.DataFrame:
        """Signals side by side, indexed by (firm_id, period); missing combinations are NaN."""
        return pd.concat([self.get(n) for n in names], axis=1, join="outer").sort_index()

    def to_long(self, labels: Callable) -> pd.DataFrame:
        """Rows of (firm_id, date, signal, value) in panel order."""
        out = self.frame.copy()
        out.insert(1, "date", labels(out.pop("period")))
        return out
