import json
import os

import pytest
import numpy as np
import pandas as pd

from custmom.core.exceptions import SyntheticGenerationError
from custmom.core.periods import Frequency, TradingCalendar
from custmom.data.ingest import ingest_announcements, ingest_factors, ingest_links, ingest_market, ingest_returns
from custmom.econometrics.fama_macbeth import fama_macbeth
from custmom.portfolios.sorter import BreakpointSpec, BreakpointUniverse, conditional_double_sort, form_portfolios
from custmom.processors.link_engine import customer_aggregates, customer_momentum, relative_size_signal
from custmom.processors.signal_output import LagWindow, SignalPanel
from custmom.synth.generator import DGPConfig, emit, generate


@pytest.fixture(scope="module")
def small():
    return generate(DGPConfig(n_firms=30, n_periods=24, seed=3, daily=True))


def test_same_seed_same_market(small):
    again = generate(DGPConfig(n_firms=30, n_periods=24, seed=3, daily=True))
    pd.testing.assert_frame_equal(small.panel.frame, again.panel.frame)
    pd.testing.assert_frame_equal(small.links.frame, again.links.frame)
    assert small.truth == again.truth
    other = generate(DGPConfig(n_firms=30, n_periods=24, seed=4, daily=True))
    assert not np.allclose(small.panel.frame["ret"], other.panel.frame["ret"])


def test_shapes_and_ids(small):
    cfg = small.config
    assert len(small.panel.firms) == 30
    assert len(small.panel.periods) == 24
    assert small.truth["customers"][0] == "C0001"
    assert len(small.truth["suppliers"]) == cfg.n_suppliers
    assert set(small.links.frame["supplier_id"]) <= set(small.truth["suppliers"])
    assert set(small.links.frame["customer_id"]) <= set(small.truth["customers"])
    assert (small.panel.frame["ret"] > -1.0).all()
    assert (small.panel.frame["me"] > 0.0).all()
    assert list(small.factors.columns) == ["MKT-RF", "SMB", "HML", "RMW", "CMA", "RF"]


def test_daily_returns_compound_to_monthly(small):
    daily = small.daily_panel.frame
    calendar = small.calendar
    firm = small.truth["suppliers"][0]
    rows = daily[daily["firm_id"] == firm]
    months = calendar.month_of(rows["period"].to_numpy())
    compounded = (1.0 + rows["ret"]).groupby(months).prod() - 1.0
    monthly = small.panel.frame[small.panel.frame["firm_id"] == firm].set_index("period")["ret"]
    np.testing.assert_allclose(compounded.to_numpy(), monthly.reindex(compounded.index).to_numpy(), rtol=1e-9)
    # no trading on the fixed holidays
    assert not ((calendar.dates.month == 12) & (calendar.dates.day == 25)).any()


def test_emitted_files_ingest_cleanly(small, tmp_path):
    paths = emit(small, str(tmp_path))
    panel = ingest_returns(paths["returns"])
    assert panel.report.n_rejected == 0
    assert len(panel) == len(small.panel)
    raw = ingest_links(paths["links"])
    assert raw.report.n_rejected == 0
    assert len(raw.frame) == small.truth["n_link_reports"]
    assert ingest_announcements(paths["announcements"]).report.n_rejected == 0
    assert ingest_market(paths["market"]).report.n_rejected == 0
    assert sorted(ingest_factors(paths["factors"]).columns) == sorted(small.factors.columns)

    calendar = TradingCalendar.from_csv(paths["calendar"])
    daily = ingest_returns(paths["returns_daily"], Frequency.DAILY, calendar=calendar)
    assert daily.report.n_rejected == 0
    with open(paths["truth"]) as f:
        truth = json.load(f)
    assert truth["rng"] == small.truth["rng"]
    assert truth["config"]["seed"] == 3
    assert os.path.exists(paths["book"])


def test_monthly_only_market_has_no_daily_files(tmp_path):
    market = generate(DGPConfig(n_firms=10, n_periods=6, seed=1))
    paths = emit(market, str(tmp_path))
    assert market.daily_panel is None
    assert "returns_daily" not in paths
    assert not os.path.exists(tmp_path / "returns_daily.csv")


def test_invalid_config():
    with pytest.raises(ValueError):
        DGPConfig(customer_share=1.5)
    with pytest.raises(ValueError):
        DGPConfig(frequency="daily")
    with pytest.raises(ValueError):
        DGPConfig(start="1978-13")


def test_impossible_returns_raise():
    with pytest.raises(SyntheticGenerationError):
        generate(DGPConfig(n_firms=10, n_periods=6, market_mean=-2.0, market_sd=0.0, max_retries=3))


def mean_long_short(beta_cmom, seed):
    market = generate(DGPConfig(n_firms=100, n_periods=120, beta_cmom=beta_cmom, seed=seed))
    cmom = customer_momentum(market.panel, market.links, LagWindow(1, 1))
    signals = SignalPanel.from_series("cmom-1-1", cmom)
    spec = BreakpointSpec(5, BreakpointUniverse.FULL_SAMPLE, per_period=True)
    return form_portfolios(market.panel, signals, "cmom-1-1", spec).long_short.mean()


@pytest.mark.slow
def test_planted_customer_momentum_is_recovered():
    flat = np.mean([mean_long_short(0.0, seed) for seed in (1, 2, 3)])
    strong = np.mean([mean_long_short(0.3, seed) for seed in (1, 2, 3)])
    assert strong > 0.0
    assert strong > flat + 0.02


@pytest.mark.slow
def test_linked_firms_comove_more_than_random_pairs():
    market = generate(DGPConfig(n_firms=100, n_periods=120, beta_contemp=0.5, seed=8))
    correlation = market.truth["link_correlation"]
    assert correlation["margin"] > 0.0


@pytest.mark.slow
def test_fama_macbeth_recovers_planted_slope():
    market = generate(DGPConfig(n_firms=300, n_periods=240, beta_cmom=0.04, seed=21))
    cmom = customer_momentum(market.panel, market.links, LagWindow(1, 1))
    fm = fama_macbeth(market.panel, SignalPanel.from_series("cmom-1-1", cmom), ["cmom-1-1"])
    assert abs(fm.coef["cmom-1-1"] - 0.04) < 2.0 * fm.se["cmom-1-1"]


@pytest.mark.slow
def test_lead_lag_rises_with_relative_customer_size():
    market = generate(DGPConfig(n_firms=300, n_periods=120, beta_cmom=0.0, beta_leadlag=0.1, seed=13))
    cmom = customer_momentum(market.panel, market.links, LagWindow(1, 1))
    rel = relative_size_signal(customer_aggregates(market.panel, market.links))
    signals = SignalPanel.concat([SignalPanel.from_series("cmom-1-1", cmom), SignalPanel.from_series("rel_size", rel)])
    result = conditional_double_sort(market.panel, signals, "rel_size", 5, "cmom-1-1", 5)
    means = result.long_short_table().mean().to_numpy()
    assert len(means) == 5
    assert (np.diff(means) >= 0).sum() >= 3
