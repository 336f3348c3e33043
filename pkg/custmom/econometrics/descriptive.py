"""
Summary statistics and correlation tables for return series.
"""
import logging
from dataclasses import dataclass
from typing import Iterable, Optional

import numpy as np
import pandas as pd
from scipy import stats

from custmom.core.exceptions import InsufficientObservationsError
from custmom.econometrics.regression import CovSpec, mean_with_se
from custmom.utils.numerical_properties import format_number, significance_stars

logger = logging.getLogger(__name__)

PERCENTILES = {"p05": 0.05, "p25": 0.25, "p50": 0.50, "p75": 0.75, "p95": 0.95}
SUMMARY_COLUMNS = ["mean", "se", "t", "sd", "min", *PERCENTILES, "max", "sharpe", "n"]
CORRELATION_STARS = (0.001, 0.01, 0.10)


def sharpe_ratio(series: pd.Series, periods_per_year: int = 12) -> float:
    """(mean / sd) * sqrt(periods per year); NaN when sd is 0."""
    values = series.dropna().to_numpy()
    sd = float(np.std(values, ddof=1)) if len(values) > 1 else float("nan")
    if not np.isfinite(sd) or sd == 0.0:
        return float("nan")
    return float(values.mean() / sd * np.sqrt(periods_per_year))


def summary_stats(series: pd.DataFrame, periods_per_year: int = 12, nw_lags: Optional[int] = None) -> pd.DataFrame:
    """
    One row per column of `series`: mean, NW standard error, t, sd, min,
    5/25/50/75/95th percentiles, max, annualized Sharpe ratio and n.

    Raises:
        InsufficientObservationsError: A series has fewer than 2 observations.
    """
    rows = {}
    cov = CovSpec.newey_west(nw_lags)
    for name in series.columns:
        values = series[name].dropna()
        if len(values) < 2:
            raise InsufficientObservationsError(f"series {name!r} has {len(values)} observations",
                                                {"series": str(name)})
        arr = values.to_numpy()
        mean, se = mean_with_se(values, cov)
        sd = float(np.std(arr, ddof=1))
        row = {"mean": mean, "se": se, "t": mean / se if se > 0 else float("nan"), "sd": sd,
               "min": float(arr.min())}
        row.update({k: float(v) for k, v in zip(PERCENTILES, np.quantile(arr, list(PERCENTILES.values())))})
        row.update({"max": float(arr.max()), "sharpe": sharpe_ratio(values, periods_per_year), "n": int(len(arr))})
        rows[name] = row
    if not rows:
        return pd.DataFrame(columns=SUMMARY_COLUMNS)
    return pd.DataFrame.from_dict(rows, orient="index")[SUMMARY_COLUMNS]


@dataclass
class CorrelationMatrix:
    """
    Pairwise-complete Pearson correlations with significance.

    Attributes:
        rho (pd.DataFrame): Correlations (NaN where overlap < min_overlap).
        n (pd.DataFrame): Pairwise overlap counts.
        pvalues (pd.DataFrame): Two-sided p-values of t = rho * sqrt((n-2)/(1-rho^2)).
        star_levels (tuple): Levels used for stars.
    """
    rho: pd.DataFrame
    n: pd.DataFrame
    pvalues: pd.DataFrame
    star_levels: tuple

    def stars(self, a: str, b: str) -> str:
        return significance_stars(self.pvalues.loc[a, b], self.star_levels)

    def lower(self, decimals: int = 2) -> pd.DataFrame:
        """Lower triangle as text, e.g. "0.29***"; upper triangle blank."""
        names = list(self.rho.columns)
        out = pd.DataFrame("", index=names, columns=names)
        for i, a in enumerate(names):
            for b in names[: i + 1]:
                value = self.rho.loc[a, b]
                out.loc[a, b] = format_number(value, decimals) + (self.stars(a, b) if a != b else "")
        return out


def correlation_matrix(series: pd.DataFrame, star_levels: Iterable[float] = CORRELATION_STARS,
                       min_overlap: int = 3) -> CorrelationMatrix:
    """Correlation table with stars from the t-test on each pairwise correlation."""
    names = list(series.columns)
    present = series.notna().astype("float64")
    n = present.T @ present
    rho = series.corr(method="pearson", min_periods=min_overlap)
    for name in names:
        if np.isfinite(rho.loc[name, name]):
            rho.loc[name, name] = 1.0
    pvalues = pd.DataFrame(np.nan, index=names, columns=names)
    for a in names:
        for b in names:
            r, m = rho.loc[a, b], n.loc[a, b]
            if not np.isfinite(r) or m < 3:
                continue
            if abs(r) >= 1.0:
                pvalues.loc[a, b] = 0.0
                continue
            t = r * np.sqrt((m - 2) / (1.0 - r * r))
            pvalues.loc[a, b] = float(2.0 * stats.t.sf(abs(t), df=m - 2))
    return CorrelationMatrix(rho, n.astype("int64"), pvalues, tuple(star_levels))
