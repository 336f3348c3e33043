"""
# Ingestion

Readers for the CSV inputs. Every reader validates rows against the
invariants of the corresponding `custmom.core.panel` type: rows that break
them are rejected and listed in the attached `IngestReport` instead of
aborting the load. Missing columns and (by default) duplicate keys are
fatal.

## Usage

```python
from custmom.core.periods import Frequency
from custmom.data.ingest import ingest_returns

panel = ingest_returns("data/returns.csv", Frequency.MONTHLY)
print(panel.report.reason_counts())
```

Decimals are parsed with Python's `float`, so a panel written with
`ReturnPanel.to_csv` reads back bit-identically.
"""
import logging
import os
from typing import Optional, Union

import numpy as np
import pandas as pd

from custmom.core.exceptions import DuplicateObservationError, SchemaError
from custmom.core.panel import (NYSE, OTHER, AnnouncementTable, IngestReport, LinkTable,
                                MarketSeries, RawLinkTable, ReturnPanel)
from custmom.core.periods import Frequency, TradingCalendar, month_ordinals, parse_dates

logger = logging.getLogger(__name__)

RETURN_FIELDS = {"firm_id": True, "date": True, "ret": True, "me": False, "vol": False, "exch": False}
DEDUPE_POLICIES = ("fatal", "last")


def _read(path: str, fields: dict[str, bool], schema_map: Optional[dict[str, str]]) -> pd.DataFrame:
    """Read a CSV as text and rename mapped columns to canonical names."""
    if not os.path.exists(path):
        raise FileNotFoundError(f"input file not found: {path}")
    raw = pd.read_csv(path, dtype=str, keep_default_na=False, encoding="utf-8")
    schema_map = dict(schema_map or {})
    out = pd.DataFrame(index=raw.index)
    for name, required in fields.items():
        source = schema_map.get(name, name)
        if source in raw.columns:
            out[name] = raw[source].str.strip()
        elif required or name in schema_map:
            raise SchemaError(f"{os.path.basename(path)}: missing column {source!r} (for {name})",
                              {"file": path, "column": source})
    return out


def _to_float(text: str) -> Optional[float]:
    try:
        return float(text)
    except ValueError:
        return None


def _numeric(column: pd.Series) -> tuple[np.ndarray, np.ndarray]:
    """Parse text to floats. Returns (values with NaN for blanks, mask of unparseable entries)."""
    values = np.full(len(column), np.nan)
    bad = np.zeros(len(column), dtype=bool)
    for i, text in enumerate(column.to_numpy()):
        if text == "":
            continue
        parsed = _to_float(text)
        if parsed is None or not np.isfinite(parsed):
            bad[i] = True
        else:
            values[i] = parsed
    return values, bad


class _Rejector:
    """Collects the first failing reason per row."""

    def __init__(self, n: int):
        self.reason = np.full(n, None, dtype=object)

    def flag(self, mask: np.ndarray, reason: str) -> None:
        mask = np.asarray(mask, dtype=bool) & self.ok
        self.reason[mask] = reason

    @property
    def ok(self) -> np.ndarray:
        return pd.isna(self.reason)

    def fill(self, report: IngestReport) -> None:
        for i in np.flatnonzero(~self.ok):
            report.rejections.append((int(i) + 2, str(self.reason[i])))


def _period_ordinals(labels: pd.Series, frequency: Frequency,
                     calendar: Optional[TradingCalendar], rejector: _Rejector) -> np.ndarray:
    if frequency is Frequency.MONTHLY:
        ords = month_ordinals(labels)
        rejector.flag(ords < 0, "unparseable date")
        return ords
    if calendar is None:
        raise ValueError("daily ingestion needs a trading calendar")
    dates = parse_dates(labels)
    rejector.flag(np.asarray(dates.isna()), "unparseable date")
    ords = calendar.ordinals(dates)
    rejector.flag(ords < 0, "date not in trading calendar")
    return ords


def _dedupe(frame: pd.DataFrame, keys: list[str], dedupe: str, report: IngestReport, path: str) -> pd.DataFrame:
    if dedupe not in DEDUPE_POLICIES:
        raise ValueError(f"dedupe must be one of {DEDUPE_POLICIES}, got {dedupe!r}")
    dup = frame.duplicated(keys, keep="last")
    if not dup.any():
        return frame
    if dedupe == "fatal":
        first = frame[frame.duplicated(keys, keep=False)].iloc[0]
        raise DuplicateObservationError(
            f"{os.path.basename(path)}: duplicate {tuple(keys)} = {tuple(first[k] for k in keys)}",
            {"file": path, "n_duplicates": int(dup.sum())})
    report.notes.append(f"dedupe=last dropped {int(dup.sum())} earlier duplicate rows")
    logger.warning(f"{path}: dropped {int(dup.sum())} duplicate rows (dedupe=last)")
    return frame[~dup]


def _exchange_tags(column: pd.Series) -> np.ndarray:
    upper = column.str.upper()
    return np.where(column == "", None, np.where(upper == NYSE, NYSE, OTHER)).astype(object)


def ingest_returns(path: str, frequency: Union[Frequency, str] = Frequency.MONTHLY,
                   schema_map: Optional[dict[str, str]] = None, dedupe: str = "fatal",
                   calendar: Optional[TradingCalendar] = None) -> ReturnPanel:
    """
    Load a returns file (`firm_id, date, ret, me, vol, exch`) into a ReturnPanel.
    A row without a return is kept when it carries a positive ME, so the
    next period can still be value weighted.

    Args:
        path (str): CSV file.
        frequency (Frequency): Declared panel frequency.
        schema_map (Optional[dict[str, str]]): canonical name -> file column name.
        dedupe (str): "fatal" (default) or "last" for duplicate (firm, period) rows.
        calendar (Optional[TradingCalendar]): Required for daily panels.

    Returns:
        ReturnPanel: Accepted rows; `panel.report` lists the rejections.

    Raises:
        SchemaError: A required or mapped column is missing.
        DuplicateObservationError: Duplicate (firm, period) under dedupe="fatal".
    """
    frequency = Frequency(frequency)
    text = _read(path, RETURN_FIELDS, schema_map)
    report = IngestReport(source=path, n_rows=len(text))
    rejector = _Rejector(len(text))

    rejector.flag((text["firm_id"] == "").to_numpy(), "missing firm_id")
    periods = _period_ordinals(text["date"], frequency, calendar, rejector)
    ret, ret_bad = _numeric(text["ret"])
    me = _numeric(text["me"])[0] if "me" in text else np.full(len(text), np.nan)
    rejector.flag(np.isnan(ret) & ~ret_bad & ~(me > 0), "missing return")
    rejector.flag(ret_bad, "unparseable return")
    rejector.flag(ret <= -1.0, "return ≤ −100%")

    columns = {"firm_id": text["firm_id"].to_numpy(), "period": periods, "ret": ret}
    for name, label in (("me", "market equity"), ("vol", "volume")):
        if name in text:
            values, bad = _numeric(text[name])
            rejector.flag(bad, f"unparseable {label}")
            rejector.flag(values < 0, f"negative {label}")
            columns[name] = values
    if "exch" in text:
        columns["exch"] = _exchange_tags(text["exch"])

    rejector.fill(report)
    frame = pd.DataFrame(columns)[rejector.ok]
    frame = _dedupe(frame, ["firm_id", "period"], dedupe, report, path)
    report.n_accepted = len(frame)
    if report.n_rejected:
        logger.warning(f"{path}: rejected {report.n_rejected} of {report.n_rows} rows {report.reason_counts()}")
    logger.info(f"Loaded {report.n_accepted} {frequency.value} observations from {path}")
    return ReturnPanel(frame, frequency, calendar if frequency is Frequency.DAILY else None, report)


def ingest_links(path: str, schema_map: Optional[dict[str, str]] = None,
                 overlap: str = "merge") -> Union[RawLinkTable, LinkTable]:
    """
    Load a links file. The header decides the form: `fy_end_date` gives a
    RawLinkTable (to be lagged by `lag_links`), `effective_from` /
    `effective_to` give a LinkTable. Overlapping windows of one pair are
    merged (`overlap="merge"`) or the later row is rejected (`"reject"`).
    """
    if overlap not in ("merge", "reject"):
        raise ValueError(f"overlap must be 'merge' or 'reject', got {overlap!r}")
    header = pd.read_csv(path, nrows=0).columns
    mapped = dict(schema_map or {})
    raw_form = mapped.get("fy_end_date", "fy_end_date") in header
    post_form = mapped.get("effective_from", "effective_from") in header
    if raw_form == post_form:
        raise SchemaError(f"{os.path.basename(path)}: header must carry either fy_end_date or "
                          f"effective_from/effective_to", {"file": path, "header": list(header)})

    fields = {"supplier_id": True, "customer_id": True}
    fields.update({"fy_end_date": True} if raw_form else {"effective_from": True, "effective_to": True})
    text = _read(path, fields, schema_map)
    report = IngestReport(source=path, n_rows=len(text))
    rejector = _Rejector(len(text))
    rejector.flag((text["supplier_id"] == "").to_numpy() | (text["customer_id"] == "").to_numpy(),
                  "missing firm identifier")
    rejector.flag((text["supplier_id"] == text["customer_id"]).to_numpy(), "supplier equals customer")

    if raw_form:
        fy_end = month_ordinals(text["fy_end_date"])
        rejector.flag(fy_end < 0, "unparseable fiscal year end")
        frame = pd.DataFrame({"supplier_id": text["supplier_id"], "customer_id": text["customer_id"],
                              "fy_end": fy_end})
        dup = frame.duplicated(keep="first").to_numpy()
        rejector.flag(dup, "duplicate link report")
        rejector.fill(report)
        frame = frame[rejector.ok]
        report.n_accepted = len(frame)
        logger.info(f"Loaded {len(frame)} raw link reports from {path}")
        return RawLinkTable(frame, report)

    start = month_ordinals(text["effective_from"])
    end = month_ordinals(text["effective_to"])
    rejector.flag((start < 0) | (end < 0), "unparseable effective date")
    rejector.flag(start > end, "effective_from after effective_to")
    rejector.fill(report)
    frame = pd.DataFrame({"supplier_id": text["supplier_id"], "customer_id": text["customer_id"],
                          "effective_from": start, "effective_to": end,
                          "line": np.arange(len(text)) + 2})[rejector.ok]
    frame = _resolve_overlaps(frame, overlap, report)
    report.n_accepted = len(frame)
    logger.info(f"Loaded {len(frame)} link windows from {path}")
    return LinkTable(frame.drop(columns="line"), report)


def _resolve_overlaps(frame: pd.DataFrame, overlap: str, report: IngestReport) -> pd.DataFrame:
    rows = []
    frame = frame.sort_values(["supplier_id", "customer_id", "effective_from", "effective_to"], kind="mergesort")
    for _, group in frame.groupby(["supplier_id", "customer_id"], sort=True):
        current = None
        for row in group.itertuples(index=False):
            if current is not None and row.effective_from <= current[3]:
                if overlap == "reject":
                    report.rejections.append((int(row.line), "overlapping link window"))
                    continue
                current[3] = max(current[3], row.effective_to)
                continue
            if current is not None:
                rows.append(current)
            current = [row.supplier_id, row.customer_id, row.effective_from, row.effective_to, row.line]
        if current is not None:
            rows.append(current)
    report.rejections.sort()
    return pd.DataFrame(rows, columns=["supplier_id", "customer_id", "effective_from", "effective_to", "line"])


def ingest_announcements(path: str, schema_map: Optional[dict[str, str]] = None,
                         dedupe: str = "fatal") -> AnnouncementTable:
    """Load `firm_id, rdq_date, eps`. Non-trading dates are kept; CAR3 shifts them forward."""
    text = _read(path, {"firm_id": True, "rdq_date": True, "eps": True}, schema_map)
    report = IngestReport(source=path, n_rows=len(text))
    rejector = _Rejector(len(text))
    rejector.flag((text["firm_id"] == "").to_numpy(), "missing firm_id")
    dates = parse_dates(text["rdq_date"])
    rejector.flag(np.asarray(dates.isna()), "unparseable announcement date")
    eps, bad = _numeric(text["eps"])
    rejector.flag(bad | np.isnan(eps), "unparseable eps")
    rejector.fill(report)
    frame = pd.DataFrame({"firm_id": text["firm_id"].to_numpy(), "announce_date": dates, "eps": eps})[rejector.ok]
    frame = _dedupe(frame, ["firm_id", "announce_date"], dedupe, report, path)
    report.n_accepted = len(frame)
    logger.info(f"Loaded {len(frame)} announcements from {path}")
    return AnnouncementTable(frame, report)


def ingest_market(path: str, frequency: Union[Frequency, str] = Frequency.MONTHLY,
                  calendar: Optional[TradingCalendar] = None,
                  schema_map: Optional[dict[str, str]] = None) -> MarketSeries:
    """Load `date, mkt_ret, rf`."""
    frequency = Frequency(frequency)
    text = _read(path, {"date": True, "mkt_ret": True, "rf": True}, schema_map)
    report = IngestReport(source=path, n_rows=len(text))
    rejector = _Rejector(len(text))
    periods = _period_ordinals(text["date"], frequency, calendar, rejector)
    mkt, mkt_bad = _numeric(text["mkt_ret"])
    rf, rf_bad = _numeric(text["rf"])
    rejector.flag(mkt_bad | np.isnan(mkt), "unparseable market return")
    rejector.flag(rf_bad | np.isnan(rf), "unparseable risk-free rate")
    rejector.flag(mkt <= -1.0, "return ≤ −100%")
    rejector.fill(report)
    frame = pd.DataFrame({"period": periods, "mkt_ret": mkt, "rf": rf})[rejector.ok]
    frame = _dedupe(frame, ["period"], "fatal", report, path)
    report.n_accepted = len(frame)
    return MarketSeries(frame.set_index("period"), frequency,
                        calendar if frequency is Frequency.DAILY else None, report)


def ingest_factors(path: str) -> pd.DataFrame:
    """
    Load a long-form factor file (`date, name, ret`) into a wide monthly
    frame indexed by period ordinal with one column per factor name.
    """
    text = _read(path, {"date": True, "name": True, "ret": True}, None)
    periods = month_ordinals(text["date"])
    values, bad = _numeric(text["ret"])
    keep = (periods >= 0) & ~bad & ~np.isnan(values)
    if (~keep).any():
        logger.warning(f"{path}: skipped {int((~keep).sum())} unparseable factor rows")
    long = pd.DataFrame({"period": periods, "name": text["name"].to_numpy(), "ret": values})[keep]
    if long.duplicated(["period", "name"]).any():
        raise DuplicateObservationError(f"{os.path.basename(path)}: duplicate (date, name) rows", {"file": path})
    wide = long.pivot(index="period", columns="name", values="ret").sort_index()
    wide.columns.name = None
    return wide


def ingest_series(path: str) -> pd.DataFrame:
    """Load a wide monthly file (`date` plus one column per series), e.g. macro growth rates."""
    raw = pd.read_csv(path, dtype=str, keep_default_na=False)
    if "date" not in raw.columns:
        raise SchemaError(f"{os.path.basename(path)}: missing column 'date'", {"file": path})
    periods = month_ordinals(raw["date"])
    out = pd.DataFrame(index=pd.Index(periods, name="period"))
    for column in raw.columns.drop("date"):
        values, _ = _numeric(raw[column].str.strip())
        out[column] = values
    return out[out.index >= 0].sort_index()


def ingest_firm_table(path: str, value_column: str, dedupe: str = "fatal") -> pd.DataFrame:
    """
    Load a firm-level monthly table (`firm_id, date, <value_column>`), e.g.
    book equity or operating profitability, as (firm_id, period, value).
    """
    text = _read(path, {"firm_id": True, "date": True, value_column: True}, None)
    report = IngestReport(source=path, n_rows=len(text))
    periods = month_ordinals(text["date"])
    values, bad = _numeric(text[value_column])
    keep = (periods >= 0) & ~bad & ~np.isnan(values) & (text["firm_id"] != "").to_numpy()
    frame = pd.DataFrame({"firm_id": text["firm_id"].to_numpy(), "period": periods, "value": values})[keep]
    frame = _dedupe(frame, ["firm_id", "period"], dedupe, report, path)
    if (~keep).any():
        logger.warning(f"{path}: skipped {int((~keep).sum())} unusable rows")
    return frame.sort_values(["firm_id", "period"], kind="mergesort").reset_index(drop=True)
