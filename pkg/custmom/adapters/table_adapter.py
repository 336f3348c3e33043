"""
# Table Adapter

The `TableAdapter` turns estimation results into report tables laid out
the way empirical asset-pricing tables are printed: a row of means, alphas or
coefficients followed by a row of bracketed t-statistics, two decimals,
and significance stars.

Returns are decimals everywhere in the engine; the percent scaling
happens here and nowhere else.

## Usage

```python
from custmom.adapters.table_adapter import TableAdapter
from custmom.econometrics.regression import CovSpec

adapter = TableAdapter(star_levels=(0.01, 0.05, 0.10))
table = adapter.sort_table("cmom deciles, EW", {"1-1": ew_deciles}, CovSpec.newey_west())
print(table.to_markdown())
```
"""
import logging
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Optional

import numpy as np
import pandas as pd
from scipy import stats

from custmom.econometrics.descriptive import CORRELATION_STARS, CorrelationMatrix
from custmom.econometrics.fama_macbeth import FMReport
from custmom.econometrics.regression import CONST, REGRESSION_STARS, CovSpec, RegressionReport, mean_with_se
from custmom.portfolios.sorter import LONG_SHORT, DoubleSortResult, PortfolioSeries
from custmom.utils.numerical_properties import format_number, format_tstat, significance_stars

logger = logging.getLogger(__name__)

PERCENT = 100.0


@dataclass
class ReportTable:
    """
    A rendered table plus the raw numbers behind it.

    Attributes:
        key (str): File-name friendly identifier.
        title (str): Human-readable caption.
        frame (pd.DataFrame): Display cells as text.
        data (dict): Unformatted values for the JSON report.
        notes (list[str]): Footnotes (covariance estimator, sample, flags).
    """
    key: str
    title: str
    frame: pd.DataFrame
    data: dict = field(default_factory=dict)
    notes: list[str] = field(default_factory=list)

    def to_markdown(self) -> str:
        columns = [str(c) for c in self.frame.columns]
        lines = [f"### {self.title}", "", "| " + " | ".join(columns) + " |",
                 "|" + "|".join("---" for _ in columns) + "|"]
        for _, row in self.frame.iterrows():
            lines.append("| " + " | ".join(str(v) for v in row.tolist()) + " |")
        lines.extend([""] + [f"_{note}_" for note in self.notes])
        return "\n".join(lines).rstrip() + "\n"


def _mean_t(series: pd.Series, cov: CovSpec) -> tuple[float, float]:
    mean, se = mean_with_se(series, cov)
    t = mean / se if np.isfinite(se) and se > 0 else float("nan")
    return mean, t


def _pvalue(t: float, df: Optional[int] = None) -> float:
    if not np.isfinite(t):
        return float("nan")
    return float(2.0 * (stats.t.sf(abs(t), df) if df else stats.norm.sf(abs(t))))


class TableAdapter:
    """
    Formats results into `ReportTable`s.

    Attributes:
        star_levels (tuple): Levels for means, alphas and coefficients.
        corr_star_levels (tuple): Levels for correlation tables.
        decimals (int): Digits after the decimal point.
    """

    def __init__(self, star_levels: Iterable[float] = REGRESSION_STARS,
                 corr_star_levels: Iterable[float] = CORRELATION_STARS, decimals: int = 2):
        self.star_levels = tuple(star_levels)
        self.corr_star_levels = tuple(corr_star_levels)
        self.decimals = decimals

    def _cell(self, value: float, t: float, scale: float = PERCENT, df: Optional[int] = None) -> str:
        text = format_number(value, self.decimals, scale)
        return text + significance_stars(_pvalue(t, df), self.star_levels) if text else text

    def sort_table(self, title: str, rows: Mapping[str, PortfolioSeries], cov: CovSpec,
                   key: str = "sort", row_label: str = "lag") -> ReportTable:
        """One mean row and one t row per sorted series; columns D1..Dn and L/S."""
        records, data = [], {}
        n = max((s.n_buckets for s in rows.values()), default=0)
        columns = [f"D{i}" for i in range(1, n + 1)] + [LONG_SHORT]
        for label, series in rows.items():
            means, tvals, cells = [], [], {}
            for bucket in list(range(1, series.n_buckets + 1)) + [LONG_SHORT]:
                mean, t = _mean_t(series.returns[bucket], cov)
                means.append(self._cell(mean, t))
                tvals.append(format_tstat(t, self.decimals))
                cells[str(bucket)] = {"mean": mean, "t": t}
            pad = [""] * (n - series.n_buckets)
            records.append([label, "mean (%)"] + means[:-1] + pad + means[-1:])
            records.append(["", "t"] + tvals[:-1] + pad + tvals[-1:])
            data[label] = {"buckets": cells, "n_periods": int(len(series.returns)),
                           "mean_firms": float(series.counts.sum(axis=1).mean()) if len(series.counts) else 0.0,
                           "absent_periods": len(series.absent)}
        frame = pd.DataFrame(records, columns=[row_label, "statistic"] + columns)
        first = next(iter(rows.values()), None)
        notes = [f"t-statistics: {cov.tag(len(first.returns)) if first is not None else cov.kind}"]
        return ReportTable(key, title, frame, data, notes)

    def alpha_table(self, title: str, reports: Mapping[str, Mapping[str, RegressionReport]],
                    key: str = "alpha") -> ReportTable:
        """Rows: portfolios (alpha and t); columns: factor models."""
        models = list(dict.fromkeys(m for by_model in reports.values() for m in by_model))
        records, data = [], {}
        for label, by_model in reports.items():
            alpha_row, t_row = [label, "alpha (%)"], ["", "t"]
            for model in models:
                report = by_model.get(model)
                if report is None:
                    alpha_row.append("")
                    t_row.append("")
                    continue
                alpha_row.append(format_number(report.alpha, self.decimals, PERCENT) + report.stars(CONST, self.star_levels))
                t_row.append(format_tstat(report.tvalues[CONST], self.decimals))
            records.extend([alpha_row, t_row])
            data[label] = {m: r.to_dict() for m, r in by_model.items()}
        frame = pd.DataFrame(records, columns=["portfolio", "statistic"] + models)
        return ReportTable(key, title, frame, data, self._cov_notes(reports))

    def _cov_notes(self, reports: Mapping[str, Mapping[str, RegressionReport]]) -> list[str]:
        tags = sorted({r.cov_type for by_model in reports.values() for r in by_model.values()})
        return [f"t-statistics: {', '.join(tags)}"] if tags else []

    def regression_table(self, title: str, reports: Mapping[str, RegressionReport],
                         key: str = "regression", scale_const: float = PERCENT) -> ReportTable:
        """Coefficient and t rows per regressor, one column per regression, then R2 and N."""
        names = list(dict.fromkeys(n for r in reports.values() for n in r.params.index))
        names = [CONST] + [n for n in names if n != CONST] if CONST in names else names
        records = []
        for name in names:
            coef_row, t_row = ["alpha (%)" if name == CONST else name], [""]
            for report in reports.values():
                if name not in report.params.index:
                    coef_row.append("")
                    t_row.append("")
                    continue
                scale = scale_const if name == CONST else 1.0
                coef_row.append(format_number(report.params[name], self.decimals, scale)
                                + report.stars(name, self.star_levels))
                t_row.append(format_tstat(report.tvalues[name], self.decimals))
            records.extend([coef_row, t_row])
        records.append(["R2 adj"] + [format_number(r.rsquared_adj, self.decimals) for r in reports.values()])
        records.append(["N"] + [str(r.nobs) for r in reports.values()])
        frame = pd.DataFrame(records, columns=["regressor"] + list(reports))
        data = {label: r.to_dict() for label, r in reports.items()}
        return ReportTable(key, title, frame, data, self._cov_notes({"": reports}))

    def fm_table(self, title: str, reports: Mapping[str, FMReport], key: str = "fm") -> ReportTable:
        """Average slopes with t rows; slopes are shown unscaled."""
        names = list(dict.fromkeys(n for r in reports.values() for n in r.coef.index))
        names = [CONST] + [n for n in names if n != CONST] if CONST in names else names
        records = []
        for name in names:
            coef_row, t_row = [name], [""]
            for report in reports.values():
                if name not in report.coef.index:
                    coef_row.append("")
                    t_row.append("")
                    continue
                t = report.tvalues[name]
                coef_row.append(self._cell(report.coef[name], t, scale=1.0, df=report.n_periods - 1))
                t_row.append(format_tstat(t, self.decimals))
            records.extend([coef_row, t_row])
        records.append(["mean adj. R2"] + [format_number(r.mean_adj_r2, self.decimals) for r in reports.values()])
        records.append(["pooled R2"] + [format_number(r.pooled_r2, self.decimals) for r in reports.values()])
        records.append(["periods"] + [str(r.n_periods) for r in reports.values()])
        records.append(["N"] + [str(r.n_obs) for r in reports.values()])
        frame = pd.DataFrame(records, columns=["regressor"] + list(reports))
        tags = sorted({r.cov_type for r in reports.values()})
        return ReportTable(key, title, frame, {k: r.to_dict() for k, r in reports.items()},
                           [f"t-statistics: {', '.join(tags)}"] if tags else [])

    def summary_table(self, title: str, summary: pd.DataFrame, key: str = "summary",
                      percent: bool = True) -> ReportTable:
        """One row per series; returns in percent when `percent`, Sharpe and n unscaled."""
        scale = PERCENT if percent else 1.0
        records = []
        for name, row in summary.iterrows():
            cells = [str(name), self._cell(row["mean"], row["t"], scale), format_tstat(row["t"], self.decimals)]
            cells += [format_number(row[c], self.decimals, scale)
                      for c in ("sd", "min", "p05", "p25", "p50", "p75", "p95", "max")]
            cells += [format_number(row["sharpe"], self.decimals), str(int(row["n"]))]
            records.append(cells)
        columns = ["series", "mean", "t", "sd", "min", "p5", "p25", "p50", "p75", "p95", "max", "sharpe", "n"]
        data = {str(k): {c: float(v) for c, v in row.items()} for k, row in summary.iterrows()}
        return ReportTable(key, title, pd.DataFrame(records, columns=columns), data)

    def characteristic_table(self, title: str, values: pd.DataFrame, key: str = "characteristics") -> ReportTable:
        """Pooled percentiles of firm-level characteristics (unscaled)."""
        quantiles = [0.01, 0.05, 0.25, 0.50, 0.75, 0.95, 0.99]
        records, data = [], {}
        for name in values.columns:
            v = values[name].dropna().to_numpy()
            if not len(v):
                continue
            qs = np.quantile(v, quantiles)
            row = {"mean": float(v.mean()), "sd": float(v.std(ddof=1)) if len(v) > 1 else float("nan"),
                   **{f"p{int(round(q * 100))}": float(x) for q, x in zip(quantiles, qs)}, "n": int(len(v))}
            data[name] = row
            records.append([name] + [format_number(row[c], self.decimals) for c in list(row)[:-1]] + [str(row["n"])])
        columns = ["characteristic", "mean", "sd", "p1", "p5", "p25", "p50", "p75", "p95", "p99", "n"]
        return ReportTable(key, title, pd.DataFrame(records, columns=columns), data)

    def correlation_table(self, title: str, matrix: CorrelationMatrix, key: str = "corr") -> ReportTable:
        lower = matrix.lower(self.decimals).reset_index().rename(columns={"index": "series"})
        data = {"rho": {a: {b: (None if not np.isfinite(v) else float(v)) for b, v in row.items()}
                        for a, row in matrix.rho.iterrows()},
                "n": {a: {b: int(v) for b, v in row.items()} for a, row in matrix.n.iterrows()}}
        levels = ", ".join(f"{level:g}" for level in sorted(matrix.star_levels, reverse=True))
        return ReportTable(key, title, lower, data, [f"stars at p < {levels}"])

    def double_sort_table(self, title: str, result: DoubleSortResult, cov: CovSpec,
                          key: str = "doublesort") -> ReportTable:
        """Rows: outer buckets (mean and t); columns: inner buckets and L/S; optional low-high row."""
        rows = {f"{result.outer_signal} Q{b}": s for b, s in sorted(result.by_outer.items())}
        table = self.sort_table(title, rows, cov, key=key, row_label=result.outer_signal)
        if result.low_minus_high is not None and len(result.low_minus_high.dropna()) >= 2:
            mean, t = _mean_t(result.low_minus_high, cov)
            width = len(table.frame.columns) - 3
            extra = pd.DataFrame([["low-high", "mean (%)"] + [""] * width + [self._cell(mean, t)],
                                  ["", "t"] + [""] * width + [format_tstat(t, self.decimals)]],
                                 columns=table.frame.columns)
            table.frame = pd.concat([table.frame, extra], ignore_index=True)
            table.data["low-high"] = {"mean": mean, "t": t}
        return table

    def coverage_table(self, title: str, coverage: pd.DataFrame, correlations: Optional[dict] = None,
                       key: str = "coverage") -> ReportTable:
        records = [[str(int(r.year)), str(int(r.n_linked)), str(int(r.n_universe)),
                    format_number(r.frac_firms, self.decimals, PERCENT), format_number(r.frac_me, self.decimals, PERCENT)]
                   for r in coverage.itertuples(index=False)]
        frame = pd.DataFrame(records, columns=["year", "linked", "universe", "% firms", "% ME"])
        notes = []
        if correlations:
            notes.append("return correlation: " + ", ".join(
                f"{k} {format_number(v, self.decimals)}" for k, v in correlations.items() if v is not None))
        data = {"years": coverage.to_dict(orient="records"), "correlations": correlations or {}}
        return ReportTable(key, title, frame, data, notes)
