"""# Customer Momentum Study Pipeline

The `custmom.pipeline` module runs the study end to end: it loads the
input files named in a YAML configuration, builds signals, portfolios and
factors, estimates the regressions and writes one report per command.

## Configuration

Built-in defaults are overridden by the YAML file, which is overridden by
command-line flags.

```yaml
# study.yaml
data_dir: data
out: out
seed: 7

sample:
  from: 1980-01
  to: 2009-12
  subperiods:
    - [1980-01, 1994-12]
    - [1995-01, 2009-12]

signals:
  lags: [1-1, 2-1, 3-1, 7-1, 12-1, 2-2, 7-2, 12-2]

sorts:
  buckets: [10, 5]
  weights: [ew, vw]

regressions:
  models: [CAPM, FF3, FF5+UMD]
  nw_lags: null      # floor(4 (T/100)^(2/9)) when null
```

## Usage

```bash
custmom synth --config study.yaml          # write a synthetic data set into data_dir
custmom all --config study.yaml            # every report into out/
custmom sort --config study.yaml --weights vw --buckets 5 --lag 1-1 --lag 12-2
```

Each command exits 0 on success. On failure an `error.json` with a
machine-readable `code` is written to the output directory and the exit
code identifies the error family (see `custmom.core.exceptions`).
"""
import argparse
import hashlib
import json
import logging
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from functools import cached_property
from typing import Callable, Optional

import numpy as np
import pandas as pd
import yaml

from custmom import __version__
from custmom.adapters.table_adapter import ReportTable, TableAdapter
from custmom.core.diagnostics import FlagLog
from custmom.core.exceptions import ConfigError, CustmomError, DegenerateBreakpointsError, MissingFactorError
from custmom.core.panel import AnnouncementTable, LinkTable, MarketSeries, RawLinkTable, ReturnPanel
from custmom.core.periods import Frequency, TradingCalendar, parse_month
from custmom.data.ingest import (ingest_announcements, ingest_factors, ingest_firm_table, ingest_links,
                                 ingest_market, ingest_returns, ingest_series)
from custmom.data.store import coverage_report, filter_panel
from custmom.econometrics.descriptive import correlation_matrix, summary_stats
from custmom.econometrics.fama_macbeth import FMReport, fama_macbeth
from custmom.econometrics.regression import FACTOR_MODELS, CovSpec, alpha_regression, spanning_test
from custmom.persistence.report_persistence import FORMATS, ReportPersistence
from custmom.portfolios.factor_factory import FactorSeries, build_factor, growth_of_dollar
from custmom.portfolios.sorter import (ALLOWED_BUCKETS, LONG_SHORT, PORTFOLIO_COLUMNS, BreakpointSpec,
                                       BreakpointUniverse, PortfolioSeries, conditional_double_sort, form_portfolios,
                                       restrict_by_ratio)
from custmom.processors.link_engine import (LINK_TIMINGS, contemporaneous_link_correlation, customer_aggregates,
                                            customer_momentum, customer_signal, lag_links, random_pair_correlation,
                                            relative_size_signal)
from custmom.processors.signal_lab import (car3_events, earnings_signal, nav_signal, standard_characteristics,
                                           sue_events, window_returns, winsorize)
from custmom.processors.signal_output import LagWindow, SignalPanel, aggregates_to_long
from custmom.synth.generator import DGPConfig, emit, generate

logger = logging.getLogger(__name__)

DEFAULT_CONFIG_PATH = os.path.join(os.path.dirname(os.path.abspath(__file__)), "config.yaml")
COMMANDS = ("coverage", "sort", "alpha", "factors", "spanning", "fm", "doublesort", "summary", "corr", "growth",
            "synth", "all")
FULL_RUN = ("coverage", "sort", "alpha", "factors", "spanning", "fm", "doublesort", "summary", "corr", "growth")
SUBPERIOD_COMMANDS = ("sort", "alpha", "summary", "fm", "spanning")
UNHASHED = ("data_dir", "out", "workers")
PRIMARY = "cmom-1-1"
DEFAULT_LAGS = ["1-1", "2-1", "3-1", "7-1", "12-1", "2-2", "7-2", "12-2"]
CHARACTERISTICS = ["cmom-1-1", "mom-12-2", "mom-1-1", "log_me", "log_bm", "op", "car3", "sue"]
REQUIRED_FILES = ("returns", "links", "market")


# Configuration sections
@dataclass
class DataSettings:
    returns: str = "returns.csv"
    links: str = "links.csv"
    market: str = "market.csv"
    announcements: Optional[str] = "announcements.csv"
    factors: Optional[str] = "factors.csv"
    book: Optional[str] = "book.csv"
    profitability: Optional[str] = "profitability.csv"
    macro: Optional[str] = "macro.csv"
    calendar: Optional[str] = "calendar.csv"
    returns_daily: Optional[str] = "returns_daily.csv"
    market_daily: Optional[str] = "market_daily.csv"
    schema_maps: dict = field(default_factory=dict)
    dedupe: str = "fatal"
    link_overlap: str = "merge"


@dataclass
class SampleSettings:
    start: Optional[str] = None
    end: Optional[str] = None
    subperiods: list = field(default_factory=list)


@dataclass
class LinkSettings:
    lag_months: int = 6
    expiry_months: int = 12
    link_timing: str = "formation"


@dataclass
class SignalSettings:
    lags: list = field(default_factory=lambda: list(DEFAULT_LAGS))
    sue_carry_months: int = 3
    accounting_carry_months: int = 12
    winsor: Optional[float] = None
    nav_hold_days: int = 63
    unique_customer_only: bool = True


@dataclass
class SortSettings:
    buckets: list = field(default_factory=lambda: [10, 5])
    breakpoints: str = "pooled"
    weights: list = field(default_factory=lambda: ["ew", "vw"])
    holding_lag: int = 0
    restrict_ratios: list = field(default_factory=lambda: [1.0, 2.0])
    relsize_buckets: int = 5
    attention_buckets: int = 5
    inner_buckets: int = 5
    daily_lags: list = field(default_factory=lambda: ["1-1", "5-1", "10-1", "20-1"])
    daily_horizons: list = field(default_factory=lambda: [1, 5, 10, 15, 20, 30])


@dataclass
class FactorSettings:
    external_file: bool = True
    signals: dict = field(default_factory=lambda: {"CMOM": "cmom-1-1", "SUEF": "sue", "CAR3F": "car3",
                                                   "UMD": "mom-12-2"})
    growth: list = field(default_factory=lambda: ["CMOM", "UMD", "MKT-RF"])
    growth_scale_sd: Optional[float] = None


@dataclass
class RegressionSettings:
    models: list = field(default_factory=lambda: list(FACTOR_MODELS))
    nw_lags: Optional[int] = None
    fm_specs: list = field(default_factory=lambda: [
        ["cmom-1-1"],
        ["cmom-1-1", "mom-1-1", "mom-12-2", "log_me", "log_bm"],
        ["cmom-1-1", "rel_size", "cmom-1-1*rel_size"],
    ])
    fm_cov: str = "plain"
    spanning: dict = field(default_factory=lambda: {
        "targets": ["CMOM"],
        "rhs": ["CAPM", "FF3", "FF3+UMD", "FF5", "FF5+UMD", "FF5+UMD+SUEF+CAR3F"],
    })


@dataclass
class ReportSettings:
    format: list = field(default_factory=lambda: list(FORMATS))
    star_levels: list = field(default_factory=lambda: [0.01, 0.05, 0.10])
    corr_star_levels: list = field(default_factory=lambda: [0.001, 0.01, 0.10])


SECTIONS = {"data": DataSettings, "sample": SampleSettings, "links": LinkSettings, "signals": SignalSettings,
            "sorts": SortSettings, "factors": FactorSettings, "regressions": RegressionSettings,
            "report": ReportSettings}
ALIASES = {"sample": {"from": "start", "to": "end"}}


@dataclass
class StudyConfig:
    """
    Resolved study configuration.

    Attributes:
        data_dir (str): Directory the `data` file names are relative to.
        out (str): Report directory.
        seed (int): Seed for synthetic data and random benchmarks.
        workers (int): Threads for the Fama-MacBeth specifications.
        synth (dict): `DGPConfig` fields for the `synth` command.
    """
    data_dir: str = "data"
    out: str = "out"
    seed: int = 0
    workers: int = 1
    data: DataSettings = field(default_factory=DataSettings)
    sample: SampleSettings = field(default_factory=SampleSettings)
    links: LinkSettings = field(default_factory=LinkSettings)
    signals: SignalSettings = field(default_factory=SignalSettings)
    sorts: SortSettings = field(default_factory=SortSettings)
    factors: FactorSettings = field(default_factory=FactorSettings)
    regressions: RegressionSettings = field(default_factory=RegressionSettings)
    report: ReportSettings = field(default_factory=ReportSettings)
    synth: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return asdict(self)

    def config_hash(self) -> str:
        """SHA-256 of the canonical JSON of every setting that can change a report."""
        payload = {k: v for k, v in self.to_dict().items() if k not in UNHASHED}
        text = json.dumps(payload, sort_keys=True, separators=(",", ":"), default=str)
        return hashlib.sha256(text.encode("utf-8")).hexdigest()

    def path(self, name: str) -> Optional[str]:
        filename = getattr(self.data, name)
        return os.path.join(self.data_dir, filename) if filename else None

    def dgp(self) -> DGPConfig:
        try:
            return DGPConfig(**{**self.synth, "seed": self.seed})
        except (TypeError, ValueError) as e:
            raise ConfigError(f"invalid synth settings: {e}", {"section": "synth"})

    def validate(self, command: str) -> None:
        """
        Raises:
            ConfigError: An invalid value, a reversed date range, or a
            missing required input file (for commands that read data).
        """
        if command not in COMMANDS:
            raise ConfigError(f"unknown command {command!r}; choose from {COMMANDS}")
        problems = []
        problems += [f"weights: {w!r}" for w in self.sorts.weights if w not in ("ew", "vw")]
        problems += [f"buckets: {b!r}" for b in self.sorts.buckets if b not in ALLOWED_BUCKETS]
        for name in ("relsize_buckets", "attention_buckets", "inner_buckets"):
            if getattr(self.sorts, name) not in ALLOWED_BUCKETS:
                problems.append(f"sorts.{name}: {getattr(self.sorts, name)!r}")
        if self.sorts.breakpoints not in [u.value for u in BreakpointUniverse]:
            problems.append(f"breakpoints: {self.sorts.breakpoints!r}")
        if self.links.link_timing not in LINK_TIMINGS:
            problems.append(f"link_timing: {self.links.link_timing!r}")
        problems += [f"format: {f!r}" for f in self.report.format if f not in FORMATS]
        if self.regressions.fm_cov not in ("plain", "nw"):
            problems.append(f"fm_cov: {self.regressions.fm_cov!r}")
        problems += [f"models: {m!r}" for m in self.regressions.models if m not in FACTOR_MODELS]
        if self.data.dedupe not in ("fatal", "last"):
            problems.append(f"dedupe: {self.data.dedupe!r}")
        if self.data.link_overlap not in ("merge", "reject"):
            problems.append(f"link_overlap: {self.data.link_overlap!r}")
        if self.workers < 1:
            problems.append("workers must be >= 1")
        if self.regressions.nw_lags is not None and self.regressions.nw_lags < 0:
            problems.append("nw_lags must be >= 0")
        for lag in list(self.signals.lags) + list(self.sorts.daily_lags):
            try:
                LagWindow.parse(str(lag))
            except ValueError as e:
                problems.append(f"lag {lag!r}: {e}")
        ranges = [(self.sample.start, self.sample.end)] + [tuple(p) for p in self.sample.subperiods]
        for rng in ranges:
            if len(rng) != 2:
                problems.append(f"subperiod {list(rng)!r} needs [from, to]")
                continue
            try:
                bounds = [parse_month(x) if x is not None else None for x in rng]
            except ValueError as e:
                problems.append(f"date range {list(rng)!r}: {e}")
                continue
            if None not in bounds and bounds[0] > bounds[1]:
                problems.append(f"date range {list(rng)!r} is reversed")
        if problems:
            raise ConfigError(f"invalid configuration: {'; '.join(problems)}", {"problems": problems})
        if command == "synth":
            self.dgp()
            return
        missing = [self.path(n) for n in REQUIRED_FILES if not os.path.exists(self.path(n))]
        if missing:
            raise ConfigError(f"input files not found: {', '.join(missing)}", {"missing": missing})


def _section(cls, name: str, raw) -> object:
    if raw is None:
        return cls()
    if not isinstance(raw, dict):
        raise ConfigError(f"config section {name!r} must be a mapping")
    raw = {ALIASES.get(name, {}).get(k, k): v for k, v in raw.items()}
    known = {f.name for f in fields(cls)}
    unknown = sorted(set(raw) - known)
    if unknown:
        raise ConfigError(f"unknown keys in {name}: {', '.join(unknown)}", {"section": name, "keys": unknown})
    if name == "sample":
        for key in ("start", "end"):
            if raw.get(key) is not None:
                raw[key] = str(raw[key])
        raw["subperiods"] = [[str(x) for x in p] for p in raw.get("subperiods") or []]
    return cls(**raw)


def _assign(raw: dict, dotted: str, value) -> None:
    *head, last = dotted.split(".")
    node = raw
    for key in head:
        if node.get(key) is None:
            node[key] = {}
        node = node[key]
        if not isinstance(node, dict):
            raise ConfigError(f"cannot override {dotted}: {key} is not a section")
    node[last] = value


def load_config(config_file: Optional[str] = None, overrides: Optional[dict] = None) -> StudyConfig:
    """
    Loads a study configuration from a YAML file and applies overrides.

    Args:
        config_file (Optional[str]): YAML path; None uses built-in defaults only.
        overrides (Optional[dict]): Dotted keys (e.g. "sorts.weights") to values; None values are ignored.

    Raises:
        ConfigError: Unreadable file, malformed YAML, unknown keys or wrong types.
    """
    raw = {}
    if config_file is not None:
        try:
            with open(config_file, "r", encoding="utf-8") as f:
                raw = yaml.safe_load(f) or {}
        except FileNotFoundError:
            raise ConfigError(f"config file not found: {config_file}", {"path": config_file})
        except yaml.YAMLError as e:
            raise ConfigError(f"error parsing config file {config_file}: {e}", {"path": config_file})
    if not isinstance(raw, dict):
        raise ConfigError(f"config file {config_file} must contain a mapping")
    for dotted, value in (overrides or {}).items():
        if value is not None:
            _assign(raw, dotted, value)

    known = {f.name for f in fields(StudyConfig)}
    unknown = sorted(set(raw) - known)
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(unknown)}", {"keys": unknown})
    kwargs = {key: _section(SECTIONS[key], key, value) if key in SECTIONS else value for key, value in raw.items()}
    if kwargs.get("synth") is None:
        kwargs["synth"] = {}
    try:
        config = StudyConfig(**kwargs)
    except TypeError as e:
        raise ConfigError(f"invalid configuration: {e}")
    for name in ("seed", "workers"):
        if not isinstance(getattr(config, name), int):
            raise ConfigError(f"{name} must be an integer")
    return config


# Inputs
@dataclass
class StudyInputs:
    """Everything read from `data_dir`, validated by the ingest layer."""
    panel: ReturnPanel
    links: LinkTable
    market: MarketSeries
    announcements: Optional[AnnouncementTable] = None
    factors: Optional[pd.DataFrame] = None
    book: Optional[pd.DataFrame] = None
    profitability: Optional[pd.DataFrame] = None
    macro: Optional[pd.DataFrame] = None
    daily_panel: Optional[ReturnPanel] = None
    daily_market: Optional[MarketSeries] = None
    ingest: dict = field(default_factory=dict)


def _optional(config: StudyConfig, name: str) -> Optional[str]:
    path = config.path(name)
    if path is None:
        return None
    if not os.path.exists(path):
        logger.info(f"Optional input {name} not found at {path}; skipping what depends on it")
        return None
    return path


def load_inputs(config: StudyConfig) -> StudyInputs:
    """Read and validate every configured input file."""
    maps = config.data.schema_maps or {}
    dedupe = config.data.dedupe
    panel = ingest_returns(config.path("returns"), Frequency.MONTHLY, maps.get("returns"), dedupe)
    links = ingest_links(config.path("links"), maps.get("links"), config.data.link_overlap)
    ingest = {"returns": panel.report.to_dict(), "links": links.report.to_dict()}
    if isinstance(links, RawLinkTable):
        links = lag_links(links, config.links.lag_months, config.links.expiry_months)
    market = ingest_market(config.path("market"), Frequency.MONTHLY, None, maps.get("market"))
    ingest["market"] = market.report.to_dict()
    inputs = StudyInputs(panel, links, market, ingest=ingest)

    path = _optional(config, "announcements")
    if path:
        inputs.announcements = ingest_announcements(path, maps.get("announcements"), dedupe)
        ingest["announcements"] = inputs.announcements.report.to_dict()
    if config.factors.external_file and _optional(config, "factors"):
        inputs.factors = ingest_factors(config.path("factors"))
    if _optional(config, "book"):
        inputs.book = ingest_firm_table(config.path("book"), "be", dedupe)
    if _optional(config, "profitability"):
        inputs.profitability = ingest_firm_table(config.path("profitability"), "op", dedupe)
    if _optional(config, "macro"):
        inputs.macro = ingest_series(config.path("macro"))

    daily = [_optional(config, n) for n in ("calendar", "returns_daily", "market_daily")]
    if all(daily):
        calendar = TradingCalendar.from_csv(daily[0])
        inputs.daily_panel = ingest_returns(daily[1], Frequency.DAILY, maps.get("returns_daily"), dedupe, calendar)
        inputs.daily_market = ingest_market(daily[2], Frequency.DAILY, calendar, maps.get("market_daily"))
        ingest["returns_daily"] = inputs.daily_panel.report.to_dict()
        ingest["market_daily"] = inputs.daily_market.report.to_dict()
    for name, report in ingest.items():
        if report.get("n_rejected"):
            logger.warning(f"{name}: {report['n_rejected']} rows rejected")
    logger.info(f"Loaded {len(panel)} firm-months for {len(panel.firms)} firms and {len(links)} link windows")
    return inputs


def _window_of(index: pd.Index, lo: int, hi: int) -> np.ndarray:
    periods = index.get_level_values("period") if isinstance(index, pd.MultiIndex) else index
    periods = np.asarray(periods)
    return (periods >= lo) & (periods <= hi)


def _factor_names(expr: str) -> list[str]:
    """"FF5+UMD+SUEF" -> model columns plus extra factors, in order, without repeats."""
    if expr in FACTOR_MODELS:
        return list(FACTOR_MODELS[expr])
    names, tokens = [], expr.split("+")
    i = 0
    while i < len(tokens):
        # longest model name starting at token i
        for j in range(len(tokens), i, -1):
            candidate = "+".join(tokens[i:j])
            if candidate in FACTOR_MODELS:
                names.extend(FACTOR_MODELS[candidate])
                i = j
                break
        else:
            names.append(tokens[i])
            i += 1
    return list(dict.fromkeys(names))


# Pipeline Class
class StudyPipeline:
    """
    Runs study commands over one sample window.

    Inputs and full-sample artefacts (signals, aggregates, factors) are
    computed once and shared with the subperiod pipelines made by
    `for_window`.
    """

    def __init__(self, config: StudyConfig, inputs: Optional[StudyInputs] = None,
                 window: Optional[tuple] = None, out_dir: Optional[str] = None, shared: Optional[dict] = None):
        self.config = config
        self._inputs = inputs
        self._shared = shared if shared is not None else {}
        self.flags = self._shared.setdefault("flags", FlagLog())
        self.window_labels = tuple(window) if window else (config.sample.start, config.sample.end)
        self.adapter = TableAdapter(config.report.star_levels, config.report.corr_star_levels)
        self.persistence = ReportPersistence(out_dir or config.out, __version__, config.config_hash())
        self.cov = CovSpec.newey_west(config.regressions.nw_lags)

    @property
    def inputs(self) -> StudyInputs:
        if self._inputs is None:
            self._inputs = load_inputs(self.config)
        return self._inputs

    def _memo(self, key: str, build: Callable):
        if key not in self._shared:
            self._shared[key] = build()
        return self._shared[key]

    def for_window(self, start: str, end: str) -> "StudyPipeline":
        out_dir = os.path.join(self.config.out, f"{start}_{end}")
        return StudyPipeline(self.config, self.inputs, (start, end), out_dir, self._shared)

    # Windows
    @cached_property
    def window(self) -> tuple[int, int]:
        periods = self.inputs.panel.periods
        start, end = self.window_labels
        lo = parse_month(start) if start else int(periods.min())
        hi = parse_month(end) if end else int(periods.max())
        if lo > hi:
            raise ConfigError(f"sample range is reversed: {start} > {end}")
        return lo, hi

    @cached_property
    def daily_window(self) -> Optional[tuple[int, int]]:
        daily = self.inputs.daily_panel
        if daily is None:
            return None
        span = daily.calendar.day_span(*self.window)
        return span if span is not None else (0, -1)

    @cached_property
    def panel(self) -> ReturnPanel:
        lo, hi = self.window
        return filter_panel(self.inputs.panel, lo, hi)

    def _clip(self, obj):
        lo, hi = self.window
        return obj[_window_of(obj.index, lo, hi)]

    # Signals
    @property
    def earnings(self) -> SignalPanel:
        return self._memo("earnings", self._build_earnings)

    def _build_earnings(self) -> SignalPanel:
        inputs, carry = self.inputs, self.config.signals.sue_carry_months
        parts = []
        if inputs.announcements is not None:
            events = sue_events(inputs.announcements, self.flags)
            parts.append(SignalPanel.from_series("sue", earnings_signal(events, "sue", "announce_date", carry)))
            if inputs.daily_panel is not None:
                car = car3_events(inputs.daily_panel, inputs.daily_market, inputs.announcements, self.flags)
                parts.append(SignalPanel.from_series("car3", earnings_signal(car, "car3", "announce_date", carry)))
        return SignalPanel.concat(parts)

    @property
    def aggregates(self) -> pd.DataFrame:
        return self._memo("aggregates", lambda: customer_aggregates(self.inputs.panel, self.inputs.links,
                                                                    self.earnings))

    @property
    def signals(self) -> SignalPanel:
        return self._memo("signals", self._build_signals)

    def _build_signals(self) -> SignalPanel:
        cfg, inputs = self.config, self.inputs
        panel, links, timing = inputs.panel, inputs.links, cfg.links.link_timing
        parts = [SignalPanel.from_series(f"mom-{lag}", window_returns(panel, LagWindow.parse(lag)))
                 for lag in ("12-2", "1-1")]
        for lag in dict.fromkeys(["1-1"] + [str(x) for x in cfg.signals.lags]):
            series = customer_momentum(panel, links, LagWindow.parse(lag), timing)
            parts.append(SignalPanel.from_series(series.name, series))
        earnings = self.earnings
        parts.append(earnings)
        for name in earnings.names:
            parts.append(SignalPanel.from_series(f"cust_{name}", customer_signal(self.aggregates, name)))
        parts.append(SignalPanel.from_series("rel_size", relative_size_signal(self.aggregates)))
        parts.append(standard_characteristics(panel, inputs.book, inputs.profitability,
                                              cfg.signals.accounting_carry_months))
        signals = winsorize(SignalPanel.concat(parts), cfg.signals.winsor)
        logger.info(f"Built {len(signals.names)} monthly signals ({len(signals)} rows)")
        return signals

    @property
    def daily_signals(self) -> Optional[SignalPanel]:
        return self._memo("daily_signals", self._build_daily_signals)

    def _build_daily_signals(self) -> Optional[SignalPanel]:
        cfg, inputs = self.config, self.inputs
        if inputs.daily_panel is None:
            return None
        daily = inputs.daily_panel
        parts = []
        for lag in cfg.sorts.daily_lags:
            series = customer_momentum(daily, inputs.links, LagWindow.parse(str(lag)), cfg.links.link_timing)
            parts.append(SignalPanel.from_series(series.name, series, Frequency.DAILY))
        if inputs.announcements is not None:
            nav = nav_signal(daily, inputs.links, inputs.announcements, self.flags, cfg.signals.nav_hold_days,
                             cfg.signals.unique_customer_only)
            parts.append(SignalPanel.from_series("nav", nav, Frequency.DAILY))
        return SignalPanel.concat(parts)

    def _window_signals(self) -> SignalPanel:
        lo, hi = self.window
        frame = self.signals.frame
        return SignalPanel(frame[(frame["period"] >= lo) & (frame["period"] <= hi)], self.signals.frequency)

    # Factors
    @property
    def built_factors(self) -> dict[str, FactorSeries]:
        return self._memo("factors", self._build_factors)

    def _build_factors(self) -> dict[str, FactorSeries]:
        external = self.inputs.factors
        out = {}
        for name, signal in self.config.factors.signals.items():
            if name == "UMD" and external is not None and "UMD" in external.columns:
                continue
            if signal not in self.signals:
                logger.warning(f"Factor {name} skipped: signal {signal} not available")
                continue
            out[name] = build_factor(self.inputs.panel, self.signals, signal, name, flags=self.flags)
        return out

    @property
    def factor_frame(self) -> pd.DataFrame:
        """External factors, market excess return, RF and constructed factors by period (full sample)."""
        def build():
            columns = {}
            if self.inputs.factors is not None:
                columns.update({c: self.inputs.factors[c] for c in self.inputs.factors.columns})
            columns.setdefault("MKT-RF", self.inputs.market.excess)
            columns.setdefault("RF", self.inputs.market.rf)
            columns.update({name: f.returns for name, f in self.built_factors.items()})
            frame = pd.concat(columns, axis=1).sort_index()
            frame.index.name = "period"
            return frame
        return self._memo("factor_frame", build)

    # Sorting helpers
    def _spec(self, n: int) -> BreakpointSpec:
        universe = BreakpointUniverse(self.config.sorts.breakpoints)
        return BreakpointSpec(n, universe, per_period=universe is not BreakpointUniverse.POOLED)

    def _keep(self, signals: SignalPanel, name: str, daily: bool, horizon: int = 1,
              mask: Optional[pd.Series] = None) -> pd.Series:
        """Rows whose holding window lies inside the sample window, combined with `mask`."""
        index = signals.get(name).index
        lo, hi = self.daily_window if daily else self.window
        start = index.get_level_values("period").to_numpy() + self.config.sorts.holding_lag
        keep = (start >= lo) & (start + horizon - 1 <= hi)
        if mask is not None:
            keep &= mask.reindex(index, fill_value=False).to_numpy(dtype=bool)
        return pd.Series(keep, index=index)

    def sort(self, name: str, n: int, weighting: str, mask: Optional[pd.Series] = None, horizon: int = 1,
             daily: bool = False) -> PortfolioSeries:
        signals = self.daily_signals if daily else self.signals
        panel = self.inputs.daily_panel if daily else self.inputs.panel
        keep = self._keep(signals, name, daily, horizon, mask)
        return form_portfolios(panel, signals, name, self._spec(n), weighting, self.config.sorts.holding_lag,
                               keep, horizon, self.flags)

    def _optional_sort(self, *args, **kwargs) -> Optional[PortfolioSeries]:
        try:
            return self.sort(*args, **kwargs)
        except DegenerateBreakpointsError as e:
            self.flags.add("sort: degenerate pooled breakpoints", args[0])
            logger.warning(f"Sort on {args[0]} skipped: {e}")
            return None

    def _labels(self, ordinals) -> list[str]:
        return self.inputs.panel.labels(ordinals)

    def _save(self, name: str, tables: list[ReportTable], extra: Optional[dict] = None) -> None:
        self.persistence.save_report(name, tables, self.config.report.format, extra)

    # Commands
    def run_coverage(self) -> None:
        panel = self.panel
        coverage = coverage_report(panel, self.inputs.links.suppliers, panel)
        lo, hi = self.window
        aggregates = self.aggregates
        aggregates = aggregates[(aggregates["period"] >= lo) & (aggregates["period"] <= hi)]
        correlations = {}
        try:
            correlations["linked"] = contemporaneous_link_correlation(panel, aggregates)
            correlations["random"] = random_pair_correlation(panel, aggregates, seed=self.config.seed)
        except ValueError as e:
            logger.warning(f"Link correlation skipped: {e}")
        table = self.adapter.coverage_table("Coverage of firms with customer links", coverage, correlations)
        self._save("coverage", [table], {"n_link_windows": len(self.inputs.links)})
        self.persistence.save_series("aggregates", aggregates_to_long(aggregates, self._labels))

    def run_sort(self) -> None:
        cfg = self.config.sorts
        lags = [str(x) for x in self.config.signals.lags]
        tables, exported = [], []
        monthly_label, daily_label = self.inputs.panel.label, None
        for weighting in cfg.weights:
            for n in cfg.buckets:
                rows = {lag: self.sort(f"cmom-{lag}", n, weighting) for lag in lags}
                exported.extend((s, monthly_label) for s in rows.values())
                tables.append(self.adapter.sort_table(f"cmom sorts, {n} buckets, {weighting.upper()}", rows,
                                                      self.cov, key=f"cmom-{weighting}-{n}"))
                for ratio in cfg.restrict_ratios:
                    mask = restrict_by_ratio(self.inputs.panel, self.aggregates, float(ratio))
                    restricted = {lag: self._optional_sort(f"cmom-{lag}", n, weighting, mask) for lag in lags}
                    restricted = {k: v for k, v in restricted.items() if v is not None}
                    if restricted:
                        tables.append(self.adapter.sort_table(
                            f"cmom sorts, relative customer size < {ratio:g}, {n} buckets, {weighting.upper()}",
                            restricted, self.cov, key=f"cmom-l{ratio:g}-{weighting}-{n}"))
                earnings = {name: self._optional_sort(name, n, weighting) for name in ("cust_sue", "cust_car3")
                            if name in self.signals}
                earnings = {k: v for k, v in earnings.items() if v is not None}
                exported.extend((s, monthly_label) for s in earnings.values())
                if earnings:
                    tables.append(self.adapter.sort_table(f"customer earnings sorts, {n} buckets, {weighting.upper()}",
                                                          earnings, self.cov, key=f"cust-earnings-{weighting}-{n}",
                                                          row_label="signal"))
        if self.daily_signals is not None:
            daily_label = self.inputs.daily_panel.label
            for lag in cfg.daily_lags:
                name = f"cmom-{lag}"
                rows = {f"{h}d": self._optional_sort(name, 10, "ew", horizon=int(h), daily=True)
                        for h in cfg.daily_horizons}
                rows = {k: v for k, v in rows.items() if v is not None}
                exported.extend((s, daily_label) for s in rows.values())
                if rows:
                    tables.append(self.adapter.sort_table(f"daily {name} deciles by holding horizon, EW", rows,
                                                          self.cov, key=f"daily-{name}", row_label="horizon"))
        self._save("sort", tables)
        frames = [series.to_long(label) for series, label in exported]
        portfolios = pd.concat(frames, ignore_index=True) if frames else pd.DataFrame(columns=PORTFOLIO_COLUMNS)
        self.persistence.save_series("portfolios", portfolios)
        self.persistence.save_series("signals", self._window_signals().to_long(self._labels))
        if daily_label is not None:
            lo, hi = self.daily_window
            frame = self.daily_signals.frame
            daily = SignalPanel(frame[(frame["period"] >= lo) & (frame["period"] <= hi)], Frequency.DAILY)
            self.persistence.save_series("signals-daily", daily.to_long(self.inputs.daily_panel.labels))

    def run_alpha(self) -> None:
        factors = self._clip(self.factor_frame)
        models = self.config.regressions.models
        n = self.config.sorts.buckets[0]
        tables = []
        for weighting in self.config.sorts.weights:
            series = self.sort(PRIMARY, n, weighting)
            reports = {}
            for b in range(1, n + 1):
                reports[f"D{b}"] = {m: alpha_regression(series.returns[b], m, factors, cov=self.cov) for m in models}
            reports[LONG_SHORT] = {m: alpha_regression(series.long_short, m, factors, long_short=True, cov=self.cov)
                                   for m in models}
            tables.append(self.adapter.alpha_table(f"{PRIMARY} portfolio alphas, {weighting.upper()}", reports,
                                                   key=f"buckets-{weighting}"))
            by_lag = {}
            for lag in self.config.signals.lags:
                ls = self.sort(f"cmom-{lag}", n, weighting).long_short
                by_lag[f"cmom-{lag}"] = {m: alpha_regression(ls, m, factors, long_short=True, cov=self.cov)
                                         for m in models}
            tables.append(self.adapter.alpha_table(f"long-short alphas by lag, {weighting.upper()}", by_lag,
                                                   key=f"lags-{weighting}"))
        self._save("alpha", tables)

    def run_factors(self) -> None:
        built = self.built_factors
        if not built:
            raise MissingFactorError(list(self.config.factors.signals))
        returns = self._clip(pd.concat({k: f.returns for k, f in built.items()}, axis=1))
        returns = returns[[c for c in returns.columns if returns[c].notna().sum() >= 2]]
        table = self.adapter.summary_table("Constructed factors", summary_stats(returns, 12, self.config.regressions.nw_lags),
                                           key="factors")
        extra = {name: {**f.metadata, "absent_periods": len(f.absent)} for name, f in built.items()}
        self._save("factors", [table], extra)
        long = returns.rename_axis("period").reset_index().melt(id_vars="period", var_name="name", value_name="ret")
        long = long.dropna(subset=["ret"])
        long.insert(0, "date", self._labels(long.pop("period")))
        self.persistence.save_series("factors", long.reset_index(drop=True))
        for name, f in built.items():
            cells = self._clip(f.cells)
            cells.insert(0, "date", self._labels(cells.index))
            self.persistence.save_series(f"factor-cells-{name}", cells.reset_index(drop=True))

    def run_spanning(self) -> None:
        frame = self._clip(self.factor_frame)
        spec = self.config.regressions.spanning or {}
        tables = []
        for target in spec.get("targets", []):
            if target not in frame.columns:
                raise MissingFactorError([target])
            reports = {}
            for expr in spec.get("rhs", []):
                names = [n for n in _factor_names(str(expr)) if n != target]
                missing = [n for n in names if n not in frame.columns]
                if missing:
                    raise MissingFactorError(missing)
                reports[str(expr)] = spanning_test(frame[target], frame[names], self.cov)
            tables.append(self.adapter.regression_table(f"Spanning tests for {target}", reports, key=target))
        self._save("spanning", tables)

    def run_fm(self) -> None:
        regs = self.config.regressions
        cov = CovSpec(regs.fm_cov, regs.nw_lags)
        signals = self._window_signals()
        jobs = {}
        for i, spec in enumerate(regs.fm_specs, start=1):
            base = {part for name in spec for part in name.split("*")}
            missing = sorted(base - set(signals.names))
            if missing:
                logger.warning(f"Fama-MacBeth specification {spec} skipped: missing {missing}")
                self.flags.add("fm: specification skipped", tuple(spec))
                continue
            jobs[f"({i})"] = list(spec)

        def estimate(spec: list[str]) -> tuple[FMReport, FlagLog]:
            flags = FlagLog()
            return fama_macbeth(self.inputs.panel, signals, spec, cov, flags), flags

        with ThreadPoolExecutor(max_workers=self.config.workers) as pool:
            results = list(pool.map(estimate, jobs.values()))
        reports = {}
        for key, (report, flags) in zip(jobs, results):
            self.flags.merge(flags)
            reports[key] = report
        self._save("fm", [self.adapter.fm_table("Fama-MacBeth regressions", reports)])

    def run_doublesort(self) -> None:
        cfg = self.config.sorts
        tables = []
        inner = cfg.inner_buckets
        for weighting in cfg.weights:
            keep = self._keep(self.signals, PRIMARY, daily=False)
            result = conditional_double_sort(self.inputs.panel, self.signals, "rel_size", cfg.relsize_buckets, PRIMARY,
                                             inner, weighting, holding_lag=cfg.holding_lag, mask=keep,
                                             low_minus_high=True, flags=self.flags)
            tables.append(self.adapter.double_sort_table(
                f"{PRIMARY} within relative customer size groups, {weighting.upper()}", result, self.cov,
                key=f"relsize-{weighting}"))
        daily = self.daily_signals
        if daily is not None and "nav" in daily:
            lag = str(cfg.daily_lags[0])
            for h in cfg.daily_horizons:
                keep = self._keep(daily, f"cmom-{lag}", daily=True, horizon=int(h))
                result = conditional_double_sort(self.inputs.daily_panel, daily, "nav", cfg.attention_buckets,
                                                 f"cmom-{lag}", inner, "ew", horizon=int(h), mask=keep,
                                                 low_minus_high=True, flags=self.flags)
                tables.append(self.adapter.double_sort_table(
                    f"daily cmom-{lag} within attention (NAV) groups, {h}-day horizon", result, self.cov,
                    key=f"attention-{h}d"))
        self._save("doublesort", tables)

    def _series_for_summary(self) -> pd.DataFrame:
        frame = self._clip(self.factor_frame).drop(columns=["RF"], errors="ignore")
        n = self.config.sorts.buckets[0]
        for weighting in self.config.sorts.weights:
            frame[f"{PRIMARY} L/S {weighting.upper()}"] = self.sort(PRIMARY, n, weighting).long_short
        return frame[[c for c in frame.columns if frame[c].notna().sum() >= 2]]

    def run_summary(self) -> None:
        series = self._series_for_summary()
        stats = summary_stats(series, 12, self.config.regressions.nw_lags)
        tables = [self.adapter.summary_table("Factor and long-short return summary", stats)]
        names = [n for n in CHARACTERISTICS if n in self.signals]
        if names:
            values = self._window_signals().wide(names).reset_index(drop=True)
            tables.append(self.adapter.characteristic_table("Firm characteristics", values))
        self._save("summary", tables)

    def run_corr(self) -> None:
        frame = self._clip(self.factor_frame).drop(columns=["RF"], errors="ignore")
        if self.inputs.macro is not None:
            frame = frame.join(self._clip(self.inputs.macro), how="left")
        matrix = correlation_matrix(frame, self.config.report.corr_star_levels)
        self._save("corr", [self.adapter.correlation_table("Correlations", matrix)])

    def run_growth(self) -> None:
        frame = self._clip(self.factor_frame)
        cfg = self.config.factors
        curves = {}
        for name in cfg.growth:
            if name not in frame.columns:
                raise MissingFactorError([name])
            curves[name] = growth_of_dollar(frame[name], cfg.growth_scale_sd, self.flags)
        growth = pd.concat(curves, axis=1).sort_index()
        final = pd.DataFrame({"series": list(curves),
                              "periods": [len(c) for c in curves.values()],
                              "final value": [f"{c.iloc[-1]:.2f}" if len(c) else "" for c in curves.values()]})
        self._save("growth", [ReportTable("growth", "Growth of one dollar", final,
                                          {k: float(c.iloc[-1]) if len(c) else None for k, c in curves.items()})])
        export = growth.copy()
        export.insert(0, "date", self._labels(export.index))
        self.persistence.save_series("growth-series", export.reset_index(drop=True))

    def run_synth(self) -> None:
        market = generate(self.config.dgp())
        written = emit(market, self.config.data_dir)
        self.persistence.save_json("synth.json", {**self.persistence.header, "files": sorted(written),
                                                  "truth": market.truth})

    def run(self, command: str) -> None:
        """Run one command (or `all`) and write its reports."""
        if command == "all":
            for name in FULL_RUN:
                self.run(name)
            for start, end in self.config.sample.subperiods:
                child = self.for_window(start, end)
                logger.info(f"Subperiod {start} to {end}")
                for name in SUBPERIOD_COMMANDS:
                    child.run(name)
            return
        logger.info(f"Running {command} on {self.window_labels[0] or 'start'} to {self.window_labels[1] or 'end'}")
        getattr(self, f"run_{command}")()
        if command != "synth":
            self.persistence.save_json("diagnostics.json", {**self.persistence.header, "flags": self.flags.to_dict(),
                                                            "ingest": self.inputs.ingest})


def run_study(config_file: Optional[str], command: str, overrides: Optional[dict] = None) -> int:
    """
    Run a study command.

    Returns:
        int: 0 on success, otherwise the exit code of the error family;
        `error.json` describes the failure.
    """
    overrides = overrides or {}
    out_dir = overrides.get("out") or "out"
    config_hash = ""
    try:
        config = load_config(config_file, overrides)
        out_dir, config_hash = config.out, config.config_hash()
        config.validate(command)
        StudyPipeline(config).run(command)
        return 0
    except CustmomError as e:
        logger.error(f"{command} failed ({e.code}): {e.message}")
        ReportPersistence(out_dir, __version__, config_hash).save_error(e)
        return e.exit_code
    except Exception as e:
        logger.exception(f"{command} failed unexpectedly")
        ReportPersistence(out_dir, __version__, config_hash).save_error(e)
        return 1


# Main Function
def main(argv: Optional[list[str]] = None) -> int:
    parser = argparse.ArgumentParser(prog="custmom", description="Run the customer momentum study.")
    parser.add_argument("command", choices=COMMANDS, help="Report family to produce.")
    parser.add_argument("--config", default=DEFAULT_CONFIG_PATH, help="YAML study configuration.")
    parser.add_argument("--data-dir", help="Directory with the input files.")
    parser.add_argument("--out", help="Output directory for reports.")
    parser.add_argument("--from", dest="start", help="First month of the sample (YYYY-MM).")
    parser.add_argument("--to", dest="end", help="Last month of the sample (YYYY-MM).")
    parser.add_argument("--weights", choices=["ew", "vw"], help="Portfolio weighting.")
    parser.add_argument("--buckets", type=int, choices=[5, 10], help="Number of portfolios.")
    parser.add_argument("--lag", action="append", help="Customer momentum window j-k; repeatable.")
    parser.add_argument("--nw-lags", type=int, help="Newey-West lag length.")
    parser.add_argument("--seed", type=int, help="Random seed.")
    parser.add_argument("--workers", type=int, help="Threads for the Fama-MacBeth specifications.")
    parser.add_argument("--format", choices=list(FORMATS), help="Report format.")
    parser.add_argument("--log-level", default="INFO", choices=["DEBUG", "INFO", "WARNING", "ERROR"])
    args = parser.parse_args(argv)

    logging.basicConfig(level=getattr(logging, args.log_level),
                        format="%(asctime)s %(levelname)s %(name)s: %(message)s")
    overrides = {
        "data_dir": args.data_dir,
        "out": args.out,
        "sample.from": args.start,
        "sample.to": args.end,
        "sorts.weights": [args.weights] if args.weights else None,
        "sorts.buckets": [args.buckets] if args.buckets else None,
        "signals.lags": args.lag,
        "regressions.nw_lags": args.nw_lags,
        "seed": args.seed,
        "workers": args.workers,
        "report.format": [args.format] if args.format else None,
    }
    return run_study(args.config, args.command, overrides)


if __name__ == "__main__":
    sys.exit(main())
