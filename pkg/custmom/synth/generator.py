"""
# Synthetic markets

Seeded generator of complete study inputs with planted customer momentum.

Random numbers come from numpy's `Generator` on the PCG64 bit generator
(`numpy.random.default_rng(seed)`), so a (seed, config) pair always yields
the same panel on every platform.

Supplier returns follow

    r_t = alpha + beta_cmom * c + beta_leadlag * log(rel) * c
          + beta_contemp * custret_t + beta_mkt * mkt_t + e_t

where c = custret_{t-d} and rel = relative customer size at t-d, with
d = 1 for high-attention suppliers and d = 1 + attention_delay for
low-attention ones. Customers follow a market model. Market equity is a
geometric random walk driven by the firm's own returns.

Draws that would produce a return at or below -100% (a non-positive ME
path) are redrawn, at most `max_retries` times per draw.

```python
from custmom.synth.generator import DGPConfig, generate, emit

market = generate(DGPConfig(n_firms=100, n_periods=120, seed=7))
emit(market, "data/")
```
"""
import json
import logging
import math
import os
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np
import pandas as pd

from custmom.core.exceptions import SyntheticGenerationError
from custmom.core.panel import AnnouncementTable, LinkTable, MarketSeries, RawLinkTable, ReturnPanel
from custmom.core.periods import Frequency, TradingCalendar, month_label, parse_month
from custmom.processors.link_engine import (contemporaneous_link_correlation, customer_aggregates, lag_links,
                                            random_pair_correlation)

logger = logging.getLogger(__name__)

RNG_ALGORITHM = "numpy PCG64 via numpy.random.default_rng"
HOLIDAYS = ((1, 1), (7, 4), (12, 25))
FILES = {
    "returns": "returns.csv", "links": "links.csv", "announcements": "announcements.csv",
    "market": "market.csv", "factors": "factors.csv", "book": "book.csv",
    "profitability": "profitability.csv", "calendar": "calendar.csv",
    "returns_daily": "returns_daily.csv", "market_daily": "market_daily.csv", "truth": "truth.json",
}


@dataclass
class DGPConfig:
    """
    Parameters of the synthetic market. Returns are monthly decimals.

    Attributes:
        n_firms (int): Firms in total (customers plus suppliers).
        customer_share (float): Fraction of firms in the customer pool.
        customers_per_supplier (float): Mean number of customers per supplier (>= 1).
        max_customers (int): Cap on customers per supplier.
        link_persistence (float): Probability a customer is reported again next fiscal year.
        n_periods (int): Months generated.
        start (str): First month, YYYY-MM.
        beta_cmom (float): Slope on the lagged customer-portfolio return.
        beta_leadlag (float): Extra slope per unit of log relative customer size.
        beta_contemp (float): Slope on the same-month customer-portfolio return.
        low_attention_share (float): Fraction of suppliers reacting late.
        attention_delay (int): Extra months of delay for low-attention suppliers.
        noise_sd (float): Idiosyncratic return volatility.
        customer_size_gap (float): Mean log-ME gap between customers and suppliers.
        seed (int): Random seed.
    """
    n_firms: int = 100
    customer_share: float = 0.3
    customers_per_supplier: float = 1.6
    max_customers: int = 4
    link_persistence: float = 0.8
    n_periods: int = 120
    start: str = "1978-01"
    frequency: str = "monthly"
    beta_cmom: float = 0.04
    beta_leadlag: float = 0.0
    beta_contemp: float = 0.3
    alpha: float = 0.002
    beta_mkt_mean: float = 1.0
    beta_mkt_sd: float = 0.3
    market_mean: float = 0.006
    market_sd: float = 0.045
    risk_free: float = 0.003
    noise_sd: float = 0.08
    low_attention_share: float = 0.0
    attention_delay: int = 1
    supplier_log_me_mean: float = 5.0
    log_me_sd: float = 1.0
    customer_size_gap: float = math.log(15.0)
    nyse_share: float = 0.4
    eps_start: float = 1.0
    eps_drift: float = 0.02
    eps_shock_sd: float = 0.1
    announce_delay_days: tuple = (20, 45)
    log_bm_mean: float = -0.5
    log_bm_sd: float = 0.6
    op_mean: float = 0.2
    op_sd: float = 0.15
    lag_months: int = 6
    expiry_months: int = 12
    daily: bool = False
    daily_noise_sd: float = 0.01
    volume_base: float = 1.0e5
    volume_sd: float = 0.3
    attention_spike: float = 1.5
    max_retries: int = 20
    seed: int = 0

    def __post_init__(self):
        self.announce_delay_days = tuple(self.announce_delay_days)
        for name in ("customer_share", "link_persistence", "low_attention_share", "nyse_share"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {value}")
        for name in ("beta_mkt_sd", "market_sd", "noise_sd", "log_me_sd", "eps_shock_sd", "log_bm_sd", "op_sd",
                     "daily_noise_sd", "volume_sd"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")
        if self.frequency != "monthly":
            raise ValueError("the generator produces monthly panels (set daily=True for a daily add-on)")
        if self.n_periods < 1 or self.n_firms < 2:
            raise ValueError("need at least 2 firms and 1 period")
        if self.customers_per_supplier < 1 or self.max_customers < 1:
            raise ValueError("each supplier needs at least one customer")
        parse_month(self.start)

    @property
    def n_customers(self) -> int:
        return min(self.n_firms - 1, max(1, int(round(self.n_firms * self.customer_share))))

    @property
    def n_suppliers(self) -> int:
        return self.n_firms - self.n_customers


@dataclass
class SyntheticMarket:
    """Everything `generate` produces, in the engine's own types."""
    config: DGPConfig
    panel: ReturnPanel
    raw_links: RawLinkTable
    links: LinkTable
    announcements: AnnouncementTable
    market: MarketSeries
    factors: pd.DataFrame
    book: pd.DataFrame
    profitability: pd.DataFrame
    truth: dict = field(default_factory=dict)
    calendar: Optional[TradingCalendar] = None
    daily_panel: Optional[ReturnPanel] = None
    daily_market: Optional[MarketSeries] = None


def _draw_returns(rng: np.random.Generator, mean: np.ndarray, sd: float, max_retries: int, what: str,
                  counter: dict) -> np.ndarray:
    """Normal draws around `mean`, redrawing any entry at or below -1."""
    out = mean + rng.normal(0.0, sd, size=mean.shape)
    for _ in range(max_retries):
        bad = out <= -1.0
        if not bad.any():
            return out
        counter["rejected_draws"] += int(bad.sum())
        out[bad] = mean[bad] + rng.normal(0.0, sd, size=int(bad.sum()))
    if (out <= -1.0).any():
        raise SyntheticGenerationError(f"could not draw {what} returns above -100% in {max_retries} retries",
                                       {"what": what})
    return out


def _raw_links(cfg: DGPConfig, rng: np.random.Generator, suppliers: list[str], customers: list[str],
               first_month: int, last_month: int) -> RawLinkTable:
    rows = []
    first_year = (first_month - cfg.lag_months - cfg.expiry_months) // 12
    last_year = last_month // 12
    extra = max(cfg.customers_per_supplier - 1.0, 0.0)
    for sid in suppliers:
        fy_month = int(rng.integers(1, 13))
        size = int(min(cfg.max_customers, len(customers), 1 + rng.poisson(extra)))
        current = list(rng.choice(len(customers), size=size, replace=False))
        for year in range(first_year, last_year + 1):
            fy_end = year * 12 + fy_month - 1
            for c in sorted(current):
                rows.append((sid, customers[c], fy_end))
            kept = [c for c in current if rng.random() < cfg.link_persistence]
            pool = [c for c in range(len(customers)) if c not in kept]
            refill = rng.choice(pool, size=min(size - len(kept), len(pool)), replace=False) if size > len(kept) else []
            current = kept + [int(c) for c in refill]
    return RawLinkTable(pd.DataFrame(rows, columns=["supplier_id", "customer_id", "fy_end"]))


def _trading_calendar(first_month: int, last_month: int) -> TradingCalendar:
    start = pd.Timestamp(month_label(first_month) + "-01")
    end = pd.Timestamp(month_label(last_month) + "-01") + pd.offsets.MonthEnd(0)
    days = pd.bdate_range(start, end)
    days = days[~pd.Series([(d.month, d.day) in HOLIDAYS for d in days]).to_numpy()]
    return TradingCalendar(days)


def generate(config: DGPConfig) -> SyntheticMarket:
    """
    Draw a synthetic market.

    Returns:
        SyntheticMarket: Monthly panel, raw and lagged links, announcements,
        market series, external-style factors, book equity, profitability,
        ground truth and, with `daily=True`, a daily panel and market.

    Raises:
        SyntheticGenerationError: Returns above -100% could not be drawn.
    """
    cfg = config
    rng = np.random.default_rng(cfg.seed)
    counter = {"rejected_draws": 0}
    T = cfg.n_periods
    first = parse_month(cfg.start)
    months = np.arange(first, first + T, dtype="int64")
    n_c, n_s = cfg.n_customers, cfg.n_suppliers
    customers = [f"C{i:04d}" for i in range(1, n_c + 1)]
    suppliers = [f"S{i:04d}" for i in range(1, n_s + 1)]

    mkt = _draw_returns(rng, np.full(T, cfg.market_mean), cfg.market_sd, cfg.max_retries, "market", counter)
    rf = np.full(T, cfg.risk_free)
    beta_c = rng.normal(cfg.beta_mkt_mean, cfg.beta_mkt_sd, n_c)
    beta_s = rng.normal(cfg.beta_mkt_mean, cfg.beta_mkt_sd, n_s)
    nyse_c = rng.random(n_c) < cfg.nyse_share
    nyse_s = rng.random(n_s) < cfg.nyse_share
    low_attention = rng.random(n_s) < cfg.low_attention_share
    me0_c = np.exp(rng.normal(cfg.supplier_log_me_mean + cfg.customer_size_gap, cfg.log_me_sd, n_c))
    me0_s = np.exp(rng.normal(cfg.supplier_log_me_mean, cfg.log_me_sd, n_s))

    raw = _raw_links(cfg, rng, suppliers, customers, first, first + T - 1)
    links = lag_links(raw, cfg.lag_months, cfg.expiry_months)
    edges = links.monthly_edges
    edges = edges[(edges["period"] >= first) & (edges["period"] < first + T)]
    edge_t = edges["period"].to_numpy() - first
    edge_s = edges["supplier_id"].map({s: i for i, s in enumerate(suppliers)}).to_numpy()
    edge_c = edges["customer_id"].map({c: i for i, c in enumerate(customers)}).to_numpy()

    def edge_mean(values: np.ndarray) -> np.ndarray:
        """(month, supplier) mean of a customer-by-month array over active links; NaN without links."""
        out = np.full((T, n_s), np.nan)
        grouped = pd.DataFrame({"t": edge_t, "s": edge_s, "v": values[edge_c, edge_t]}).groupby(["t", "s"])["v"].mean()
        out[grouped.index.get_level_values("t"), grouped.index.get_level_values("s")] = grouped.to_numpy()
        return out

    r_c = _draw_returns(rng, beta_c[:, None] * mkt[None, :], cfg.noise_sd, cfg.max_retries, "customer", counter)
    me_c = me0_c[:, None] * np.cumprod(1.0 + r_c, axis=1)
    custret = edge_mean(r_c)
    cust_me = edge_mean(me_c)

    r_s = np.zeros((n_s, T))
    me_s = np.zeros((n_s, T))
    delay = np.where(low_attention, 1 + cfg.attention_delay, 1)
    rows = np.arange(n_s)
    for t in range(T):
        lagged = np.maximum(t - delay, 0)
        ok = t - delay >= 0
        c_lag = np.where(ok, np.nan_to_num(custret[lagged, rows], nan=0.0), 0.0)
        with np.errstate(invalid="ignore", divide="ignore"):
            log_rel = np.log(cust_me[lagged, rows] / me_s[rows, lagged])
        log_rel = np.where(ok & np.isfinite(log_rel), log_rel, 0.0)
        contemp = np.nan_to_num(custret[t], nan=0.0)
        mean = (cfg.alpha + cfg.beta_cmom * c_lag + cfg.beta_leadlag * log_rel * c_lag
                + cfg.beta_contemp * contemp + beta_s * mkt[t])
        r_s[:, t] = _draw_returns(rng, mean, cfg.noise_sd, cfg.max_retries, "supplier", counter)
        me_s[:, t] = (me0_s if t == 0 else me_s[:, t - 1]) * (1.0 + r_s[:, t])

    ids = np.array(customers + suppliers)
    ret = np.vstack([r_c, r_s])
    me = np.vstack([me_c, me_s])
    exch = np.where(np.concatenate([nyse_c, nyse_s]), "NYSE", "Other")
    vol_base = np.exp(rng.normal(math.log(cfg.volume_base), 0.5, len(ids)))

    calendar = daily_panel = daily_market = None
    if cfg.daily:
        calendar = _trading_calendar(first, first + T - 1)
    announcements = _announcements(cfg, rng, ids, first, T)

    if cfg.daily:
        daily_panel, daily_market, monthly_vol = _daily(cfg, rng, calendar, ids, ret, me, exch, mkt, rf, vol_base,
                                                        months, links, announcements, low_attention, n_c)
    else:
        monthly_vol = vol_base[:, None] * 21.0 * np.exp(rng.normal(0.0, cfg.volume_sd, ret.shape))

    frame = pd.DataFrame({
        "firm_id": np.repeat(ids, T),
        "period": np.tile(months, len(ids)),
        "ret": ret.ravel(),
        "me": me.ravel(),
        "vol": np.round(monthly_vol).ravel(),
        "exch": np.repeat(exch, T),
    })
    panel = ReturnPanel(frame, Frequency.MONTHLY)
    market = MarketSeries(pd.DataFrame({"mkt_ret": mkt, "rf": rf}, index=months), Frequency.MONTHLY)
    factors = _external_factors(rng, months, mkt, rf)
    book, profitability = _accounting(cfg, rng, ids, months, me)

    aggregates = customer_aggregates(panel, links)
    log_rel = np.log(aggregates["rel_size"].dropna()) if len(aggregates) else pd.Series(dtype=float)
    truth = {
        "config": _config_dict(cfg),
        "rng": RNG_ALGORITHM,
        "customers": customers,
        "suppliers": suppliers,
        "low_attention_suppliers": [s for s, low in zip(suppliers, low_attention) if low],
        "n_link_reports": int(len(raw.frame)),
        "n_link_windows": int(len(links.frame)),
        "rejected_draws": int(counter["rejected_draws"]),
        "mean_log_rel_size": float(log_rel.mean()) if len(log_rel) else None,
    }
    if len(aggregates) >= 2:
        linked = contemporaneous_link_correlation(panel, aggregates)
        random = random_pair_correlation(panel, aggregates, seed=cfg.seed)
        truth["link_correlation"] = {"linked": linked, "random": random,
                                     "margin": None if linked is None or random is None else linked - random}
    logger.info(f"Generated {len(ids)} firms x {T} months (seed {cfg.seed}), "
                f"{len(links.frame)} link windows, {counter['rejected_draws']} redrawn returns")
    return SyntheticMarket(cfg, panel, raw, links, announcements, market, factors, book, profitability, truth,
                           calendar, daily_panel, daily_market)


def _config_dict(cfg: DGPConfig) -> dict:
    out = asdict(cfg)
    out["announce_delay_days"] = list(cfg.announce_delay_days)
    return out


def _announcements(cfg: DGPConfig, rng: np.random.Generator, ids: np.ndarray, first: int, T: int) -> AnnouncementTable:
    """Quarterly EPS as a seasonal random walk, announced 20-45 calendar days after quarter end."""
    first_q = (first // 3) * 3 - 36
    quarter_ends = np.arange(first_q + 2, first + T, 3)
    lo, hi = cfg.announce_delay_days
    rows = []
    for firm in ids:
        eps = list(rng.normal(cfg.eps_start, cfg.eps_shock_sd, 4))
        for q in range(4, len(quarter_ends)):
            eps.append(eps[q - 4] + cfg.eps_drift + rng.normal(0.0, cfg.eps_shock_sd))
        delays = rng.integers(lo, hi + 1, len(quarter_ends))
        for q, month in enumerate(quarter_ends):
            end = pd.Timestamp(month_label(month) + "-01") + pd.offsets.MonthEnd(0)
            rows.append((firm, end + pd.Timedelta(days=int(delays[q])), float(eps[q])))
    frame = pd.DataFrame(rows, columns=["firm_id", "announce_date", "eps"])
    return AnnouncementTable(frame)


def _external_factors(rng: np.random.Generator, months: np.ndarray, mkt: np.ndarray, rf: np.ndarray) -> pd.DataFrame:
    factors = pd.DataFrame({"MKT-RF": mkt - rf}, index=pd.Index(months, name="period"))
    for name, sd in (("SMB", 0.03), ("HML", 0.03), ("RMW", 0.02), ("CMA", 0.02)):
        factors[name] = rng.normal(0.002, sd, len(months))
    factors["RF"] = rf
    return factors


def _accounting(cfg: DGPConfig, rng: np.random.Generator, ids: np.ndarray, months: np.ndarray,
                me: np.ndarray) -> tuple[pd.DataFrame, pd.DataFrame]:
    """Annual book equity and operating profitability observed each June."""
    june = np.flatnonzero(months % 12 == 5)
    book, prof = [], []
    for i, firm in enumerate(ids):
        for t in june:
            bm = math.exp(rng.normal(cfg.log_bm_mean, cfg.log_bm_sd))
            book.append((firm, int(months[t]), bm * me[i, t]))
            prof.append((firm, int(months[t]), float(rng.normal(cfg.op_mean, cfg.op_sd))))
    columns = ["firm_id", "period", "value"]
    return pd.DataFrame(book, columns=columns), pd.DataFrame(prof, columns=columns)


def _daily(cfg, rng, calendar, ids, ret, me, exch, mkt, rf, vol_base, months, links, announcements,
           low_attention, n_c):
    """
    Daily returns that compound to the monthly ones (log return split evenly
    plus zero-sum noise), and volumes with a spike for high-attention
    suppliers on their customers' announcement days.
    """
    day_month = calendar.month_of(np.arange(len(calendar)))
    n_days = len(calendar)
    daily_ret = np.zeros((len(ids), n_days))
    daily_mkt = np.zeros(n_days)
    for t, month in enumerate(months):
        idx = np.flatnonzero(day_month == month)
        n = len(idx)
        z = rng.normal(0.0, cfg.daily_noise_sd, (len(ids), n))
        z -= z.mean(axis=1, keepdims=True)
        daily_ret[:, idx] = np.expm1(np.log1p(ret[:, t])[:, None] / n + z)
        zm = rng.normal(0.0, cfg.daily_noise_sd, n)
        daily_mkt[idx] = np.expm1(np.log1p(mkt[t]) / n + zm - zm.mean())
    volume = vol_base[:, None] * np.exp(rng.normal(0.0, cfg.volume_sd, (len(ids), n_days)))

    firm_index = {f: i for i, f in enumerate(ids)}
    high = {ids[n_c + i] for i, low in enumerate(low_attention) if not low}
    events = announcements.frame
    events = events[events["announce_date"] >= calendar.dates[0]]
    event_day = calendar.dates.searchsorted(pd.DatetimeIndex(events["announce_date"]))
    events = events.assign(event_day=event_day)
    events = events[events["event_day"] < n_days]
    events = events.assign(period=calendar.month_of(events["event_day"].to_numpy()))
    hits = events.rename(columns={"firm_id": "customer_id"}).merge(links.monthly_edges, on=["customer_id", "period"])
    hits = hits[hits["supplier_id"].isin(high)]
    for supplier, day in zip(hits["supplier_id"], hits["event_day"]):
        volume[firm_index[supplier], day] *= math.exp(cfg.attention_spike)
    volume = np.round(volume)

    month_pos = day_month - months[0]
    frame = pd.DataFrame({
        "firm_id": np.repeat(ids, n_days),
        "period": np.tile(np.arange(n_days, dtype="int64"), len(ids)),
        "ret": daily_ret.ravel(),
        "me": me[:, month_pos].ravel(),
        "vol": volume.ravel(),
        "exch": np.repeat(exch, n_days),
    })
    daily_panel = ReturnPanel(frame, Frequency.DAILY, calendar)
    daily_rf = (1.0 + rf[month_pos]) ** (1.0 / 21.0) - 1.0
    daily_market = MarketSeries(pd.DataFrame({"mkt_ret": daily_mkt, "rf": daily_rf}, index=np.arange(n_days)),
                                Frequency.DAILY, calendar)
    monthly_vol = np.stack([volume[:, day_month == m].sum(axis=1) for m in months], axis=1)
    return daily_panel, daily_market, monthly_vol


def emit(market: SyntheticMarket, out_dir: str) -> dict[str, str]:
    """
    Write the market as the engine's CSV inputs plus `truth.json`.

    Returns:
        dict[str, str]: Logical name -> written path.
    """
    os.makedirs(out_dir, exist_ok=True)
    paths = {name: os.path.join(out_dir, filename) for name, filename in FILES.items()}
    market.panel.to_csv(paths["returns"])
    market.raw_links.to_csv(paths["links"])
    market.announcements.to_csv(paths["announcements"])
    market.market.to_csv(paths["market"])
    long = market.factors.reset_index().melt(id_vars="period", var_name="name", value_name="ret")
    long.insert(0, "date", [month_label(p) for p in long.pop("period")])
    long.to_csv(paths["factors"], index=False)
    for key, column in (("book", "be"), ("profitability", "op")):
        table = getattr(market, key).rename(columns={"value": column})
        table.insert(1, "date", [month_label(p) for p in table.pop("period")])
        table.to_csv(paths[key], index=False)
    written = {k: v for k, v in paths.items() if k not in ("calendar", "returns_daily", "market_daily")}
    if market.daily_panel is not None:
        market.calendar.to_csv(paths["calendar"])
        market.daily_panel.to_csv(paths["returns_daily"])
        market.daily_market.to_csv(paths["market_daily"])
        written.update({k: paths[k] for k in ("calendar", "returns_daily", "market_daily")})
    with open(paths["truth"], "w", encoding="utf-8") as f:
        json.dump(market.truth, f, indent=2, sort_keys=True, allow_nan=False, default=float)
    logger.info(f"Wrote synthetic market to {out_dir}")
    return written
