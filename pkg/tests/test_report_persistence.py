import json

import pytest
import numpy as np
import pandas as pd

from custmom.adapters.table_adapter import ReportTable
from custmom.core.exceptions import MissingFactorError
from custmom.persistence.report_persistence import ReportPersistence


@pytest.fixture
def table():
    frame = pd.DataFrame({"series": ["CMOM", "UMD"], "mean": ["1.06***", ""]})
    return ReportTable("factors", "Constructed factors", frame,
                       {"CMOM": {"mean": 0.0106, "sd": float("nan")}, "UMD": {"n": np.int64(12)}},
                       ["t-statistics: NW(lags=4)"])


def test_save_report_all_formats(tmp_path, table):
    persistence = ReportPersistence(str(tmp_path / "out"), "0.1.0", "abc123")
    written = persistence.save_report("factors", [table])
    names = sorted(p.split("/")[-1] for p in written)
    assert names == ["factors-factors.csv", "factors.json", "factors.md"]

    text = (tmp_path / "out" / "factors.md").read_text()
    assert text.startswith("<!-- engine_version: 0.1.0; config_hash: abc123; schema_version: 1 -->\n# factors\n")
    assert "### Constructed factors" in text

    csv = (tmp_path / "out" / "factors-factors.csv").read_text().splitlines()
    assert csv[0] == "# engine_version=0.1.0,config_hash=abc123"
    assert csv[1] == "series,mean"

    payload = json.loads((tmp_path / "out" / "factors.json").read_text())
    assert payload["config_hash"] == "abc123"
    assert payload["tables"][0]["rows"] == [["CMOM", "1.06***"], ["UMD", ""]]
    # NaN becomes null, numpy integers become ints
    assert payload["tables"][0]["data"]["CMOM"]["sd"] is None
    assert payload["tables"][0]["data"]["UMD"]["n"] == 12


def test_subset_of_formats(tmp_path, table):
    persistence = ReportPersistence(str(tmp_path), "0.1.0", "abc123")
    written = persistence.save_report("factors", [table], formats=["md"], extra={"flags": {}})
    assert len(written) == 1
    assert not (tmp_path / "factors.json").exists()
    with pytest.raises(ValueError):
        persistence.save_report("factors", [table], formats=["xlsx"])


def test_writes_are_byte_identical(tmp_path, table):
    a = ReportPersistence(str(tmp_path / "a"), "0.1.0", "abc123")
    b = ReportPersistence(str(tmp_path / "b"), "0.1.0", "abc123")
    for persistence in (a, b):
        persistence.save_report("factors", [table], extra={"absent": [3, 4]})
        persistence.save_series("factors-series", pd.DataFrame({"date": ["1990-01"], "CMOM": [1 / 3]}))
    for name in ("factors.md", "factors.json", "factors-factors.csv", "factors-series.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_series_precision(tmp_path):
    persistence = ReportPersistence(str(tmp_path), "0.1.0", "h")
    path = persistence.save_series("growth-series", pd.DataFrame({"date": ["1990-01"], "CMOM": [1 / 3]}))
    lines = open(path).read().splitlines()
    assert lines[2] == "1990-01,0.333333333333"


def test_error_file(tmp_path):
    persistence = ReportPersistence(str(tmp_path), "0.1.0", "h")
    persistence.save_error(MissingFactorError(["SMB"]))
    body = json.loads((tmp_path / "error.json").read_text())
    assert body["code"] == "missing_factor"
    assert body["exit_code"] == 5
    assert body["type"] == "MissingFactorError"
    assert body["config_hash"] == "h"

    persistence.save_error(RuntimeError("boom"))
    body = json.loads((tmp_path / "error.json").read_text())
    assert body["code"] == "internal_error"
    assert body["exit_code"] == 1
    assert body["message"] == "boom"
