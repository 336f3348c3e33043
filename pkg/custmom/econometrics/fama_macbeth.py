"""
# Fama-MacBeth

Two-pass estimation: an OLS cross-section of returns on signals every
period, then time-series inference on the slope series. Both passes run
through `linearmodels.FamaMacBeth`; the second pass uses its plain
covariance of the slopes or a Bartlett kernel (Newey-West) with a fixed
lag length.

Regressor names are signal names from a `SignalPanel`; "a*b" adds the
elementwise product of signals a and b (no demeaning). The sample is one
complete-case set across all regressors of the specification.

```python
from custmom.econometrics.fama_macbeth import fama_macbeth

fm = fama_macbeth(panel, signals, ["cmom-1-1", "mom-12-2", "log_me", "cmom-1-1*rel_size"])
fm.coef, fm.tvalues, fm.mean_adj_r2, fm.pooled_r2
```
"""
import logging
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import pandas as pd
import statsmodels.api as sm
from linearmodels import FamaMacBeth

from custmom.core.diagnostics import FlagLog
from custmom.core.exceptions import InsufficientObservationsError
from custmom.core.panel import ReturnPanel
from custmom.econometrics.regression import CONST, CovSpec
from custmom.processors.signal_output import SignalPanel

logger = logging.getLogger(__name__)

INTERACTION = "*"


@dataclass
class FMReport:
    """
    Attributes:
        coef (pd.Series): Mean slope per regressor (and intercept).
        se (pd.Series): Standard error of the mean slope (plain or NW).
        tvalues (pd.Series): coef / se where se > 0.
        mean_adj_r2 (float): Average per-period adjusted R squared.
        pooled_r2 (float): R squared of one pooled OLS over the same sample.
        n_periods (int): Cross-sections used.
        n_obs (int): Firm-periods used.
        cov_type (str): "OLS" (classic) or "NW(lags=L)".
        slopes (pd.DataFrame): Per-period estimates.
        skipped (list[int]): Periods left out (too few firms or singular).
    """
    coef: pd.Series
    se: pd.Series
    tvalues: pd.Series
    mean_adj_r2: float
    pooled_r2: float
    n_periods: int
    n_obs: int
    cov_type: str
    spec: list[str] = field(default_factory=list)
    slopes: pd.DataFrame = field(default_factory=pd.DataFrame)
    skipped: list[int] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "spec": list(self.spec),
            "coef": {k: float(v) for k, v in self.coef.items()},
            "se": {k: float(v) for k, v in self.se.items()},
            "tvalues": {k: float(v) for k, v in self.tvalues.items()},
            "mean_adj_r2": float(self.mean_adj_r2),
            "pooled_r2": float(self.pooled_r2),
            "n_periods": int(self.n_periods),
            "n_obs": int(self.n_obs),
            "cov_type": self.cov_type,
        }


def regression_frame(panel: ReturnPanel, signals: SignalPanel, spec: list[str]) -> pd.DataFrame:
    """Complete-case (firm_id, period) frame with `ret` and one column per spec entry."""
    base = sorted({part for name in spec for part in name.split(INTERACTION)})
    data = signals.wide(base)
    data["ret"] = panel.keyed["ret"].reindex(data.index).to_numpy()
    for name in spec:
        if INTERACTION in name:
            parts = name.split(INTERACTION)
            product = data[parts[0]].copy()
            for part in parts[1:]:
                product = product * data[part]
            data[name] = product
    return data[["ret"] + list(spec)].dropna()


def _estimable(group: pd.DataFrame) -> bool:
    """More firms than regressors and a full-rank design."""
    n, k = group.shape
    return n > k and np.linalg.matrix_rank(group.to_numpy()) == k


def fama_macbeth(panel: ReturnPanel, signals: SignalPanel, spec: list[str], cov: Optional[CovSpec] = None,
                 flags: Optional[FlagLog] = None) -> FMReport:
    """
    Fama-MacBeth regression of returns at t on signals stamped at t.

    Args:
        panel (ReturnPanel): Dependent returns.
        signals (SignalPanel): Regressors.
        spec (list[str]): Regressor names, interactions as "a*b".
        cov (Optional[CovSpec]): Second-pass standard errors; classic plain by default.
        flags (Optional[FlagLog]): Collects skipped periods.

    Raises:
        InsufficientObservationsError: No period has more firms than regressors and a full-rank design.
    """
    cov = cov or CovSpec.plain()
    data = regression_frame(panel, signals, spec)
    if data.empty:
        raise InsufficientObservationsError(f"no complete cases for {spec}", {"spec": list(spec)})
    exog = sm.add_constant(data[list(spec)], has_constant="add")

    usable = exog.groupby(level="period", sort=True).apply(_estimable)
    skipped = [int(p) for p in usable.index[~usable.to_numpy(dtype=bool)]]
    if flags is not None:
        for period in skipped:
            flags.add("fm: period skipped", period)
    keep = ~exog.index.get_level_values("period").isin(skipped)
    if not keep.any():
        raise InsufficientObservationsError(f"no cross-section with more observations than regressors for {spec}",
                                            {"spec": list(spec)})
    y, exog = data.loc[keep, "ret"], exog.loc[keep]

    n_periods = int(usable.sum())
    model = FamaMacBeth(y, exog)
    if cov.kind == "nw":
        result = model.fit(cov_type="kernel", kernel="bartlett", bandwidth=cov.resolve_lags(n_periods),
                           debiased=False)
    else:
        result = model.fit(cov_type="unadjusted", debiased=False)

    columns = [CONST] + list(spec)
    coef = result.params.reindex(columns)
    se = result.std_errors.reindex(columns)
    tvalues = coef / se.where(se > 0)
    slopes = result.all_params[columns]
    slopes.index = slopes.index.astype("int64")
    slopes.index.name = "period"
    pooled_r2 = float(sm.OLS(y, exog).fit().rsquared)

    n_obs = int(len(y))
    logger.info(f"Fama-MacBeth {spec}: {n_periods} periods, {n_obs} observations, {len(skipped)} skipped")
    return FMReport(coef=coef, se=se, tvalues=tvalues, mean_adj_r2=float(result.avg_adj_rsquared),
                    pooled_r2=pooled_r2, n_periods=n_periods, n_obs=n_obs,
                    cov_type=cov.tag(n_periods), spec=list(spec), slopes=slopes, skipped=skipped)
