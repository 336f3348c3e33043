"""
# Panel types

Immutable containers for every tabular input the engine consumes. Each type
wraps a pandas DataFrame in a canonical column layout and checks its
invariants on construction.

| Type                | Columns                                                  |
|---------------------|----------------------------------------------------------|
| `ReturnPanel`       | firm_id, period, ret, me, vol, exch                      |
| `RawLinkTable`      | supplier_id, customer_id, fy_end                         |
| `LinkTable`         | supplier_id, customer_id, effective_from, effective_to   |
| `AnnouncementTable` | firm_id, announce_date, eps                              |
| `MarketSeries`      | period (index), mkt_ret, rf                              |

Periods are integer ordinals (see `custmom.core.periods`). Link windows are
always monthly ordinals, even when used against a daily panel.
"""
import logging
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Optional

import numpy as np
import pandas as pd

from custmom.core.periods import Frequency, TradingCalendar, month_label

logger = logging.getLogger(__name__)

PANEL_COLUMNS = ["firm_id", "period", "ret", "me", "vol", "exch"]
LINK_COLUMNS = ["supplier_id", "customer_id", "effective_from", "effective_to"]
RAW_LINK_COLUMNS = ["supplier_id", "customer_id", "fy_end"]
ANNOUNCEMENT_COLUMNS = ["firm_id", "announce_date", "eps"]

NYSE = "NYSE"
OTHER = "Other"


@dataclass
class IngestReport:
    """
    Outcome of reading one input file.

    Attributes:
        source (str): File the rows came from, or a description.
        n_rows (int): Data rows read.
        n_accepted (int): Rows that passed validation.
        rejections (list[tuple[int, str]]): (file line, reason) for each rejected row.
        notes (list[str]): Free-form remarks (dedupe applied, empty result, ...).
    """
    source: str = ""
    n_rows: int = 0
    n_accepted: int = 0
    rejections: list[tuple[int, str]] = field(default_factory=list)
    notes: list[str] = field(default_factory=list)

    @property
    def n_rejected(self) -> int:
        return len(self.rejections)

    @property
    def empty(self) -> bool:
        return self.n_accepted == 0

    def reason_counts(self) -> dict[str, int]:
        counts: dict[str, int] = {}
        for _, reason in self.rejections:
            counts[reason] = counts.get(reason, 0) + 1
        return dict(sorted(counts.items()))

    def to_dict(self) -> dict:
        return {"source": self.source, "n_rows": self.n_rows, "n_accepted": self.n_accepted,
                "n_rejected": self.n_rejected, "reasons": self.reason_counts(), "notes": list(self.notes)}


def _label_for(frequency: Frequency, calendar: Optional[TradingCalendar]):
    if frequency is Frequency.MONTHLY:
        return month_label
    if calendar is None:
        raise ValueError("daily panels require a trading calendar")
    return calendar.label


@dataclass
class ReturnPanel:
    """
    Firm-by-period observations at a single frequency.

    The frame is sorted by (firm_id, period) and never mutated after
    construction; transformations return new panels.
    """
    frame: pd.DataFrame
    frequency: Frequency = Frequency.MONTHLY
    calendar: Optional[TradingCalendar] = None
    report: IngestReport = field(default_factory=IngestReport)

    def __post_init__(self):
        missing = [c for c in PANEL_COLUMNS if c not in self.frame.columns]
        for column in missing:
            if column in ("firm_id", "period", "ret"):
                raise ValueError(f"panel frame lacks required column {column!r}")
        frame = self.frame.copy()
        for column in missing:
            frame[column] = None if column == "exch" else np.nan
        frame = frame[PANEL_COLUMNS]
        frame["firm_id"] = frame["firm_id"].astype(str)
        frame["period"] = frame["period"].astype("int64")
        for column in ("ret", "me", "vol"):
            frame[column] = frame[column].astype("float64")
        frame["exch"] = frame["exch"].astype(object).where(frame["exch"].notna(), None)
        if frame.duplicated(["firm_id", "period"]).any():
            raise ValueError("(firm_id, period) pairs must be unique")
        if (frame["ret"].dropna() <= -1.0).any():
            raise ValueError("returns must exceed -100%")
        if self.frequency is Frequency.DAILY and self.calendar is None:
            raise ValueError("daily panels require a trading calendar")
        self.frame = frame.sort_values(["firm_id", "period"], kind="mergesort").reset_index(drop=True)

    def __len__(self) -> int:
        return len(self.frame)

    @property
    def firms(self) -> np.ndarray:
        return np.sort(self.frame["firm_id"].unique())

    @property
    def periods(self) -> np.ndarray:
        return np.sort(self.frame["period"].unique())

    def label(self, ordinal: int) -> str:
        return _label_for(self.frequency, self.calendar)(ordinal)

    def labels(self, ordinals: Iterable[int]) -> list[str]:
        to_label = _label_for(self.frequency, self.calendar)
        return [to_label(o) for o in ordinals]

    def year_of(self, ordinals: np.ndarray) -> np.ndarray:
        ordinals = np.asarray(ordinals, dtype="int64")
        if self.frequency is Frequency.DAILY:
            ordinals = self.calendar.month_of(ordinals)
        return ordinals // 12

    def month_of(self, ordinals: np.ndarray) -> np.ndarray:
        ordinals = np.asarray(ordinals, dtype="int64")
        if self.frequency is Frequency.DAILY:
            return self.calendar.month_of(ordinals)
        return ordinals

    @cached_property
    def keyed(self) -> pd.DataFrame:
        """Frame indexed by (firm_id, period)."""
        return self.frame.set_index(["firm_id", "period"])

    @cached_property
    def wide_returns(self) -> pd.DataFrame:
        """Returns pivoted to period x firm over the contiguous period range."""
        wide = self.frame.pivot(index="period", columns="firm_id", values="ret")
        if len(wide):
            wide = wide.reindex(pd.Index(np.arange(wide.index.min(), wide.index.max() + 1), name="period"))
        return wide

    def with_frame(self, frame: pd.DataFrame, report: Optional[IngestReport] = None) -> "ReturnPanel":
        return ReturnPanel(frame, self.frequency, self.calendar, report or IngestReport(source=self.report.source))

    def to_csv(self, path: str) -> None:
        out = self.frame.copy()
        out.insert(1, "date", self.labels(out["period"]))
        out = out.drop(columns="period")
        out["exch"] = out["exch"].fillna("")
        out.to_csv(path, index=False)


@dataclass
class RawLinkTable:
    """Supplier-customer links as reported, stamped with the fiscal-year-end month."""
    frame: pd.DataFrame
    report: IngestReport = field(default_factory=IngestReport)

    def __post_init__(self):
        frame = self.frame[RAW_LINK_COLUMNS].copy()
        frame["supplier_id"] = frame["supplier_id"].astype(str)
        frame["customer_id"] = frame["customer_id"].astype(str)
        frame["fy_end"] = frame["fy_end"].astype("int64")
        if (frame["supplier_id"] == frame["customer_id"]).any():
            raise ValueError("supplier_id must differ from customer_id")
        self.frame = frame.sort_values(RAW_LINK_COLUMNS, kind="mergesort").reset_index(drop=True)

    def to_csv(self, path: str) -> None:
        out = self.frame.copy()
        out["fy_end_date"] = [month_label(o) for o in out.pop("fy_end")]
        out.to_csv(path, index=False)


@dataclass
class LinkTable:
    """
    Lagged supplier-customer links with inclusive monthly validity windows.

    Attributes:
        frame (pd.DataFrame): supplier_id, customer_id, effective_from, effective_to.
        report (IngestReport): Rows rejected while building the table.
    """
    frame: pd.DataFrame
    report: IngestReport = field(default_factory=IngestReport)

    def __post_init__(self):
        frame = self.frame[LINK_COLUMNS].copy()
        frame["supplier_id"] = frame["supplier_id"].astype(str)
        frame["customer_id"] = frame["customer_id"].astype(str)
        frame["effective_from"] = frame["effective_from"].astype("int64")
        frame["effective_to"] = frame["effective_to"].astype("int64")
        if (frame["effective_from"] > frame["effective_to"]).any():
            raise ValueError("effective_from must not exceed effective_to")
        if (frame["supplier_id"] == frame["customer_id"]).any():
            raise ValueError("supplier_id must differ from customer_id")
        frame = frame.sort_values(LINK_COLUMNS, kind="mergesort").reset_index(drop=True)
        same_pair = (frame["supplier_id"] == frame["supplier_id"].shift()) & \
                    (frame["customer_id"] == frame["customer_id"].shift())
        if (same_pair & (frame["effective_from"] <= frame["effective_to"].shift())).any():
            raise ValueError("overlapping windows for the same supplier-customer pair")
        self.frame = frame

    def __len__(self) -> int:
        return len(self.frame)

    @property
    def suppliers(self) -> np.ndarray:
        return np.sort(self.frame["supplier_id"].unique())

    @cached_property
    def monthly_edges(self) -> pd.DataFrame:
        """One row per (supplier_id, customer_id, month) the link is active."""
        f = self.frame
        lengths = (f["effective_to"] - f["effective_from"] + 1).to_numpy()
        starts = np.repeat(f["effective_from"].to_numpy(), lengths)
        offsets = np.arange(lengths.sum()) - np.repeat(np.cumsum(lengths) - lengths, lengths)
        return pd.DataFrame({
            "supplier_id": np.repeat(f["supplier_id"].to_numpy(), lengths),
            "customer_id": np.repeat(f["customer_id"].to_numpy(), lengths),
            "period": (starts + offsets).astype("int64"),
        })

    def edges(self, frequency: Frequency = Frequency.MONTHLY,
              calendar: Optional[TradingCalendar] = None) -> pd.DataFrame:
        """Active (supplier_id, customer_id, period) rows at the requested frequency."""
        if frequency is Frequency.MONTHLY:
            return self.monthly_edges
        if calendar is None:
            raise ValueError("daily link expansion needs a trading calendar")
        months = pd.DataFrame({"month": calendar.month_of(np.arange(len(calendar))),
                               "period": np.arange(len(calendar), dtype="int64")})
        daily = self.monthly_edges.rename(columns={"period": "month"}).merge(months, on="month")
        return daily.drop(columns="month").sort_values(["supplier_id", "customer_id", "period"],
                                                       kind="mergesort").reset_index(drop=True)


@dataclass
class AnnouncementTable:
    """Quarterly earnings announcements: (firm_id, announce_date, eps)."""
    frame: pd.DataFrame
    report: IngestReport = field(default_factory=IngestReport)

    def __post_init__(self):
        frame = self.frame[ANNOUNCEMENT_COLUMNS].copy()
        frame["firm_id"] = frame["firm_id"].astype(str)
        frame["announce_date"] = pd.to_datetime(frame["announce_date"]).dt.normalize()
        frame["eps"] = frame["eps"].astype("float64")
        if frame.duplicated(["firm_id", "announce_date"]).any():
            raise ValueError("(firm_id, announce_date) pairs must be unique")
        self.frame = frame.sort_values(["firm_id", "announce_date"], kind="mergesort").reset_index(drop=True)

    def __len__(self) -> int:
        return len(self.frame)

    def for_firm(self, firm_id: str) -> pd.DataFrame:
        f = self.frame
        return f[f["firm_id"] == str(firm_id)].reset_index(drop=True)

    def to_csv(self, path: str) -> None:
        out = self.frame.rename(columns={"announce_date": "rdq_date"})
        out = out.assign(rdq_date=out["rdq_date"].dt.strftime("%Y-%m-%d"))
        out.to_csv(path, index=False)


@dataclass
class MarketSeries:
    """Market return and risk-free rate per period ordinal."""
    frame: pd.DataFrame
    frequency: Frequency = Frequency.MONTHLY
    calendar: Optional[TradingCalendar] = None
    report: IngestReport = field(default_factory=IngestReport)

    def __post_init__(self):
        frame = self.frame[["mkt_ret", "rf"]].astype("float64").copy()
        frame.index = pd.Index(self.frame.index.astype("int64"), name="period")
        if frame.index.has_duplicates:
            raise ValueError("market series periods must be unique")
        self.frame = frame.sort_index()

    def __len__(self) -> int:
        return len(self.frame)

    @property
    def mkt_ret(self) -> pd.Series:
        return self.frame["mkt_ret"]

    @property
    def rf(self) -> pd.Series:
        return self.frame["rf"]

    @property
    def excess(self) -> pd.Series:
        return (self.frame["mkt_ret"] - self.frame["rf"]).rename("MKT-RF")

    def missing_periods(self, periods: Iterable[int]) -> list[int]:
        return sorted(set(int(p) for p in periods) - set(self.frame.index))

    def to_csv(self, path: str) -> None:
        to_label = _label_for(self.frequency, self.calendar)
        out = self.frame.reset_index()
        out.insert(0, "date", [to_label(o) for o in out.pop("period")])
        out.to_csv(path, index=False)
