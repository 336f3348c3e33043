"""
# Report Persistence

The `ReportPersistence` manager writes report tables to an output
directory as Markdown, CSV and/or JSON. Every file carries the engine
version and the configuration hash; nothing time-dependent is written, so
the same inputs and configuration always give byte-identical files.

## Usage

```python
from custmom.persistence.report_persistence import ReportPersistence

persistence = ReportPersistence("out/", engine_version="0.1.0", config_hash="3f2a...")
persistence.save_report("sort", [table], formats=["md", "csv", "json"])
```
"""
import json
import logging
import math
import os
from typing import Iterable, Optional

import numpy as np
import pandas as pd

from custmom.adapters.table_adapter import ReportTable
from custmom.core.exceptions import CustmomError

logger = logging.getLogger(__name__)

FORMATS = ("md", "csv", "json")
REPORT_SCHEMA_VERSION = 1
FLOAT_DIGITS = 12


def _clean(value):
    """JSON-safe, fixed-precision copy of nested report data."""
    if isinstance(value, dict):
        return {str(k): _clean(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_clean(v) for v in value]
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        return None if not math.isfinite(value) else round(value, FLOAT_DIGITS)
    if isinstance(value, pd.Timestamp):
        return value.strftime("%Y-%m-%d")
    return value


class ReportPersistence:
    """
    Writes reports under one output directory.

    Attributes:
        out_dir (str): Target directory, created on first write.
        engine_version (str): Embedded in every file.
        config_hash (str): Embedded in every file.
    """

    def __init__(self, out_dir: str, engine_version: str, config_hash: str):
        self.out_dir = out_dir
        self.engine_version = engine_version
        self.config_hash = config_hash

    @property
    def header(self) -> dict:
        return {"engine_version": self.engine_version, "config_hash": self.config_hash,
                "schema_version": REPORT_SCHEMA_VERSION}

    def _path(self, name: str) -> str:
        os.makedirs(self.out_dir, exist_ok=True)
        return os.path.join(self.out_dir, name)

    def save_report(self, name: str, tables: list[ReportTable], formats: Iterable[str] = FORMATS,
                    extra: Optional[dict] = None) -> list[str]:
        """
        Write one report.

        Args:
            name (str): Report name; files are `<name>.md`, `<name>-<table key>.csv`, `<name>.json`.
            tables (list[ReportTable]): Tables in display order.
            formats (Iterable[str]): Any of "md", "csv", "json".
            extra (Optional[dict]): Additional JSON payload (flags, ingest summaries).

        Returns:
            list[str]: Written paths.
        """
        formats = list(formats)
        unknown = [f for f in formats if f not in FORMATS]
        if unknown:
            raise ValueError(f"unknown report formats {unknown}; choose from {FORMATS}")
        written = []
        if "md" in formats:
            written.append(self._write_markdown(name, tables))
        if "csv" in formats:
            written.extend(self._write_csv(name, table) for table in tables)
        if "json" in formats:
            payload = {**self.header, "report": name,
                       "tables": [{"key": t.key, "title": t.title, "columns": [str(c) for c in t.frame.columns],
                                   "rows": t.frame.astype(object).where(t.frame.notna(), None).values.tolist(),
                                   "data": t.data, "notes": t.notes} for t in tables]}
            if extra:
                payload["extra"] = extra
            written.append(self.save_json(f"{name}.json", payload))
        logger.info(f"Saved report {name} ({', '.join(formats)}) to {self.out_dir}")
        return written

    def _write_markdown(self, name: str, tables: list[ReportTable]) -> str:
        path = self._path(f"{name}.md")
        lines = [f"<!-- engine_version: {self.engine_version}; config_hash: {self.config_hash}; "
                 f"schema_version: {REPORT_SCHEMA_VERSION} -->", f"# {name}", ""]
        body = "\n".join(lines) + "\n" + "\n".join(t.to_markdown() for t in tables)
        with open(path, "w", encoding="utf-8", newline="\n") as f:
            f.write(body)
        return path

    def _write_csv(self, name: str, table: ReportTable) -> str:
        path = self._path(f"{name}-{table.key}.csv")
        with open(path, "w", encoding="utf-8", newline="\n") as f:
            f.write(f"# engine_version={self.engine_version},config_hash={self.config_hash}\n")
            table.frame.to_csv(f, index=False, lineterminator="\n", float_format=f"%.{FLOAT_DIGITS}g")
        return path

    def save_series(self, name: str, frame: pd.DataFrame) -> str:
        """Write a numeric series export (figure data, portfolio returns) as CSV."""
        path = self._path(f"{name}.csv")
        with open(path, "w", encoding="utf-8", newline="\n") as f:
            f.write(f"# engine_version={self.engine_version},config_hash={self.config_hash}\n")
            frame.to_csv(f, index=False, lineterminator="\n", float_format=f"%.{FLOAT_DIGITS}g")
        return path

    def save_json(self, filename: str, payload: dict) -> str:
        path = self._path(filename)
        with open(path, "w", encoding="utf-8", newline="\n") as f:
            json.dump(_clean(payload), f, indent=2, sort_keys=True, allow_nan=False)
            f.write("\n")
        return path

    def save_error(self, error: Exception) -> str:
        """Machine-readable `error.json` for a failed run."""
        if isinstance(error, CustmomError):
            body = error.to_dict()
        else:
            body = {"code": "internal_error", "exit_code": 1, "message": str(error), "details": {}}
        body.update(self.header)
        body["type"] = type(error).__name__
        return self.save_json("error.json", body)
