"""
# Periods

Panels index time by integer ordinals so that window arithmetic is plain
integer arithmetic:

- monthly ordinal = `year * 12 + (month - 1)`;
- daily ordinal = position of the date in an explicit `TradingCalendar`.

```python
from custmom.core.periods import month_ordinal, month_label, PeriodIndex, Frequency

t = month_ordinal(1991, 7)
month_label(t - 7)                       # '1990-12'
PeriodIndex.monthly("1990-12").shift(7)  # PeriodIndex(monthly, ..., '1991-07')
```
"""
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Optional, Union

import numpy as np
import pandas as pd

DateLike = Union[str, pd.Timestamp, np.datetime64]


class Frequency(str, Enum):
    MONTHLY = "monthly"
    DAILY = "daily"

    @property
    def periods_per_year(self) -> int:
        return 12 if self is Frequency.MONTHLY else 252


def month_ordinal(year: int, month: int) -> int:
    return int(year) * 12 + int(month) - 1


def month_label(ordinal: int) -> str:
    year, month0 = divmod(int(ordinal), 12)
    return f"{year:04d}-{month0 + 1:02d}"


def parse_dates(labels: Iterable) -> pd.DatetimeIndex:
    """
    Parse ISO dates (`YYYY-MM-DD`) or months (`YYYY-MM`, read as the first
    day of the month). Unparseable entries become NaT.
    """
    text = pd.Series(list(labels), dtype="object").astype("string").str.strip()
    text = text.where(text.str.len().fillna(0) != 7, text + "-01")
    return pd.DatetimeIndex(pd.to_datetime(text, format="%Y-%m-%d", errors="coerce"))


def month_ordinals(labels: Iterable) -> np.ndarray:
    """Monthly ordinals for date/month labels; unparseable entries map to -1."""
    dates = parse_dates(labels)
    ords = np.full(len(dates), -1, dtype="int64")
    ok = ~np.asarray(dates.isna())
    ords[ok] = dates[ok].year * 12 + dates[ok].month - 1
    return ords


def parse_month(label: DateLike) -> int:
    ords = month_ordinals([str(pd.Timestamp(label).date()) if not isinstance(label, str) else label])
    if ords[0] < 0:
        raise ValueError(f"unparseable month label: {label!r}")
    return int(ords[0])


@dataclass(frozen=True, order=True)
class PeriodIndex:
    """
    A single period position.

    Attributes:
        frequency (Frequency): Panel frequency.
        ordinal (int): Integer position; contiguous within a panel.
        calendar_label (str): `YYYY-MM` for monthly, ISO date for daily.
    """
    frequency: Frequency
    ordinal: int
    calendar_label: str

    @classmethod
    def monthly(cls, label: DateLike) -> "PeriodIndex":
        ordinal = parse_month(label)
        return cls(Frequency.MONTHLY, ordinal, month_label(ordinal))

    @classmethod
    def daily(cls, label: DateLike, calendar: "TradingCalendar") -> "PeriodIndex":
        ordinal = calendar.ordinal(label)
        if ordinal is None:
            raise ValueError(f"{label!r} is not a trading day")
        return cls(Frequency.DAILY, ordinal, calendar.label(ordinal))

    def shift(self, n: int, calendar: Optional["TradingCalendar"] = None) -> "PeriodIndex":
        ordinal = self.ordinal + int(n)
        if self.frequency is Frequency.MONTHLY:
            return PeriodIndex(self.frequency, ordinal, month_label(ordinal))
        if calendar is None:
            raise ValueError("daily period arithmetic needs a trading calendar")
        return PeriodIndex(self.frequency, ordinal, calendar.label(ordinal))


class TradingCalendar:
    """
    Ordered trading dates. Daily ordinals are positions in this list, so
    weekends and holidays never receive an ordinal.
    """

    def __init__(self, dates: Iterable[DateLike]):
        index = pd.DatetimeIndex(pd.to_datetime(list(dates))).normalize()
        if index.hasnans:
            raise ValueError("trading calendar contains unparseable dates")
        if not index.is_monotonic_increasing or index.has_duplicates:
            raise ValueError("trading calendar dates must be strictly increasing")
        self.dates = index
        self._months = (index.year * 12 + index.month - 1).to_numpy(dtype="int64")

    @classmethod
    def from_csv(cls, path: str) -> "TradingCalendar":
        frame = pd.read_csv(path, dtype=str)
        column = "date" if "date" in frame.columns else frame.columns[0]
        return cls(frame[column])

    def to_csv(self, path: str) -> None:
        pd.DataFrame({"date": self.dates.strftime("%Y-%m-%d")}).to_csv(path, index=False)

    def __len__(self) -> int:
        return len(self.dates)

    def __eq__(self, other: object) -> bool:
        return isinstance(other, TradingCalendar) and self.dates.equals(other.dates)

    def label(self, ordinal: int) -> str:
        return self.dates[int(ordinal)].strftime("%Y-%m-%d")

    def labels(self, ordinals: Iterable[int]) -> list[str]:
        return list(self.dates[np.asarray(list(ordinals), dtype="int64")].strftime("%Y-%m-%d"))

    def ordinal(self, date: DateLike) -> Optional[int]:
        """Exact position of a trading date, or None."""
        ts = pd.Timestamp(date).normalize()
        pos = int(self.dates.searchsorted(ts, side="left"))
        if pos < len(self.dates) and self.dates[pos] == ts:
            return pos
        return None

    def ordinals(self, dates: pd.DatetimeIndex) -> np.ndarray:
        """Vectorised exact lookup; dates that are not trading days map to -1."""
        dates = pd.DatetimeIndex(dates).normalize()
        pos = self.dates.searchsorted(dates, side="left")
        inside = pos < len(self.dates)
        hit = np.zeros(len(dates), dtype=bool)
        hit[inside] = self.dates[pos[inside]] == dates[inside]
        hit &= ~dates.isna()
        return np.where(hit, pos, -1).astype("int64")

    def shift_forward(self, date: DateLike) -> Optional[int]:
        """First trading day on or after `date`; None when past the last calendar day."""
        pos = int(self.dates.searchsorted(pd.Timestamp(date).normalize(), side="left"))
        return pos if pos < len(self.dates) else None

    def month_of(self, ordinals: Union[int, np.ndarray]) -> Union[int, np.ndarray]:
        """Monthly ordinal of trading-day ordinals."""
        if np.isscalar(ordinals):
            return int(self._months[int(ordinals)])
        return self._months[np.asarray(ordinals, dtype="int64")]

    def day_span(self, month_from: int, month_to: int) -> Optional[tuple[int, int]]:
        """First and last trading-day ordinals whose month lies in [month_from, month_to]."""
        lo = int(np.searchsorted(self._months, month_from, side="left"))
        hi = int(np.searchsorted(self._months, month_to, side="right")) - 1
        if hi < lo:
            return None
        return lo, hi
