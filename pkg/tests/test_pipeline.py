import json

import pytest
import pandas as pd
import yaml

from custmom import __version__
from custmom.core.exceptions import ConfigError
from custmom.pipeline import DEFAULT_CONFIG_PATH, _factor_names, load_config, main, run_study

SMALL_STUDY = {
    "seed": 5,
    "sample": {"subperiods": [["1990-01", "1992-06"], ["1992-07", "1994-12"]]},
    "signals": {"lags": ["1-1", "12-1"]},
    "sorts": {"buckets": [5], "daily_lags": ["1-1"], "daily_horizons": [1, 5]},
    "regressions": {"models": ["CAPM", "FF3+UMD"]},
    "synth": {"n_firms": 60, "n_periods": 60, "start": "1990-01", "beta_cmom": 0.2, "daily": True},
}

SMALL_STUDY_RHS = ["CAPM", "FF3", "FF3+UMD", "FF5", "FF5+UMD", "FF5+UMD+SUEF+CAR3F"]

SERIES_HEADERS = {
    "signals.csv": "firm_id,date,signal,value",
    "signals-daily.csv": "firm_id,date,signal,value",
    "aggregates.csv": "supplier_id,date,cust_ret_ew,n_customers,mean_cust_sue,mean_cust_car3,rel_size",
    "portfolios.csv": "date,bucket,ret,count,weighting,signal_name,n_buckets,horizon",
    "factors.csv": "date,name,ret",
    "growth-series.csv": "date,CMOM,UMD,MKT-RF",
}


def write_config(path, study, data_dir, out):
    config = dict(study, data_dir=str(data_dir), out=str(out))
    with open(path, "w") as f:
        yaml.safe_dump(config, f)
    return str(path)


def read_json(path):
    with open(path) as f:
        return json.load(f)


@pytest.fixture(scope="module")
def study(tmp_path_factory):
    root = tmp_path_factory.mktemp("study")
    config = write_config(root / "study.yaml", SMALL_STUDY, root / "data", root / "out")
    assert run_study(config, "synth") == 0
    assert run_study(config, "all") == 0
    return root, config


def test_default_config_loads():
    config = load_config(DEFAULT_CONFIG_PATH)
    config.validate("synth")
    assert config.sample.subperiods == [["1978-01", "1982-12"], ["1983-01", "1987-12"]]
    assert config.synth["start"] == "1978-01"
    assert config.dgp().seed == config.seed


def test_overrides_and_aliases():
    config = load_config(None, {"sample.from": "1990-01", "sample.to": "1999-12", "sorts.weights": ["vw"],
                                "seed": 3, "workers": None})
    assert (config.sample.start, config.sample.end) == ("1990-01", "1999-12")
    assert config.sorts.weights == ["vw"]
    assert config.seed == 3
    assert config.workers == 1


def test_unknown_keys_are_rejected(tmp_path):
    with pytest.raises(ConfigError):
        load_config(None, {"sorts.colour": "blue"})
    with pytest.raises(ConfigError):
        load_config(None, {"plotting": True})
    bad = tmp_path / "bad.yaml"
    bad.write_text("sorts: [unclosed\n")
    with pytest.raises(ConfigError) as excinfo:
        load_config(str(bad))
    assert excinfo.value.exit_code == 2


def test_invalid_values_are_collected():
    config = load_config(None, {"sorts.weights": ["ew", "cap"], "sorts.buckets": [7],
                                "sample.subperiods": [["1995-01", "1990-01"]]})
    with pytest.raises(ConfigError) as excinfo:
        config.validate("synth")
    problems = excinfo.value.details["problems"]
    assert "weights: 'cap'" in problems
    assert "buckets: 7" in problems
    assert any("reversed" in p for p in problems)


def test_config_hash_ignores_paths_and_workers():
    base = load_config(None)
    moved = load_config(None, {"data_dir": "elsewhere", "out": "reports", "workers": 4})
    changed = load_config(None, {"regressions.nw_lags": 3})
    assert base.config_hash() == moved.config_hash()
    assert base.config_hash() != changed.config_hash()


def test_factor_names():
    assert _factor_names("FF3") == ["MKT-RF", "SMB", "HML"]
    assert _factor_names("FF5+UMD+SUEF") == ["MKT-RF", "SMB", "HML", "RMW", "CMA", "UMD", "SUEF"]
    assert _factor_names("CAPM+CMOM") == ["MKT-RF", "CMOM"]


def test_missing_inputs_exit_with_config_error(tmp_path):
    code = main(["sort", "--config", DEFAULT_CONFIG_PATH, "--data-dir", str(tmp_path / "nothing"),
                 "--out", str(tmp_path / "out")])
    assert code == 2
    error = read_json(tmp_path / "out" / "error.json")
    assert error["code"] == "config_error"
    assert error["engine_version"] == __version__
    assert len(error["details"]["missing"]) == 3


def test_unknown_config_key_exit_code(tmp_path):
    config = tmp_path / "study.yaml"
    config.write_text("sorts:\n  colour: blue\n")
    assert run_study(str(config), "sort", {"out": str(tmp_path / "out")}) == 2
    assert read_json(tmp_path / "out" / "error.json")["details"]["keys"] == ["colour"]


def test_missing_factor_exit_code(tmp_path):
    study = dict(SMALL_STUDY, synth=dict(SMALL_STUDY["synth"], n_periods=36, daily=False))
    config = write_config(tmp_path / "study.yaml", study, tmp_path / "data", tmp_path / "out")
    assert run_study(config, "synth") == 0
    # CAR3F needs daily returns
    assert run_study(config, "spanning") == 5
    error = read_json(tmp_path / "out" / "error.json")
    assert error["code"] == "missing_factor"
    assert error["details"]["missing"] == ["CAR3F"]


@pytest.mark.slow
def test_synth_writes_inputs_and_truth(study):
    root, _ = study
    for name in ("returns.csv", "links.csv", "market.csv", "announcements.csv", "factors.csv", "calendar.csv",
                 "returns_daily.csv", "market_daily.csv", "truth.json"):
        assert (root / "data" / name).exists()
    synth = read_json(root / "out" / "synth.json")
    assert synth["truth"]["config"]["seed"] == 5


@pytest.mark.slow
def test_full_run_writes_every_report(study):
    root, _ = study
    out = root / "out"
    for name in ("coverage", "sort", "alpha", "factors", "spanning", "fm", "doublesort", "summary", "corr", "growth"):
        assert (out / f"{name}.md").exists()
        assert (out / f"{name}.json").exists()
    for name, header in SERIES_HEADERS.items():
        lines = (out / name).read_text().splitlines()
        assert lines[0].startswith(f"# engine_version={__version__},config_hash=")
        assert lines[1] == header
        assert len(lines) > 2
    assert (out / "factor-cells-CMOM.csv").exists()
    assert (out / "diagnostics.json").exists()
    for window in ("1990-01_1992-06", "1992-07_1994-12"):
        for name in ("sort", "alpha", "summary", "fm", "spanning"):
            assert (out / window / f"{name}.md").exists()
    assert not (out / "error.json").exists()

    sort = read_json(out / "sort.json")
    assert [t["key"] for t in sort["tables"]][:1] == ["cmom-ew-5"]
    assert "daily-cmom-1-1" in [t["key"] for t in sort["tables"]]
    spanning = read_json(out / "spanning.json")
    assert list(spanning["tables"][0]["data"]) == SMALL_STUDY_RHS
    factors = read_json(out / "factors.json")
    assert set(factors["extra"]) == {"CMOM", "SUEF", "CAR3F", "UMD"}
    long = pd.read_csv(out / "factors.csv", skiprows=1)
    assert "CMOM" in set(long["name"])
    assert set(long["name"]) <= set(factors["extra"])
    portfolios = pd.read_csv(out / "portfolios.csv", skiprows=1)
    assert {"cmom-1-1", "cmom-12-1"} <= set(portfolios["signal_name"])
    assert set(portfolios["horizon"]) <= {1, 5}
    assert set(pd.read_csv(out / "signals.csv", skiprows=1)["signal"]) >= {"cmom-1-1", "mom-12-2"}


@pytest.mark.slow
def test_reports_are_reproducible(study, tmp_path):
    root, config = study
    again = tmp_path / "again"
    assert run_study(config, "all", {"out": str(again), "workers": 3}) == 0
    first = root / "out"
    for name in ("sort.md", "alpha.json", "fm.json", "factors.csv", "portfolios.csv", "signals.csv",
                 "1990-01_1992-06/fm.json"):
        assert (first / name).read_bytes() == (again / name).read_bytes()
