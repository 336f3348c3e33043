"""
# Regression

Time-series OLS with plain or Newey-West (Bartlett kernel) covariance,
Jensen-alpha regressions on standard factor models, and factor spanning
tests. Estimation runs through statsmodels; `CovSpec` picks the covariance.

```python
from custmom.econometrics.regression import CovSpec, ols, alpha_regression

report = ols(y, X, CovSpec.newey_west(lags=6))
report.params, report.bse, report.tvalues

alpha = alpha_regression(deciles.long_short, "FF5+UMD", factors, long_short=True)
alpha.alpha_pct
```
"""
import logging
import math
from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np
import pandas as pd
import statsmodels.api as sm

from custmom.core.exceptions import CollinearityError, InsufficientObservationsError, MissingFactorError
from custmom.utils.numerical_properties import significance_stars

logger = logging.getLogger(__name__)

CONST = "const"
REGRESSION_STARS = (0.01, 0.05, 0.10)

FACTOR_MODELS: dict[str, list[str]] = {
    "CAPM": ["MKT-RF"],
    "CAPM+UMD": ["MKT-RF", "UMD"],
    "FF3": ["MKT-RF", "SMB", "HML"],
    "FF3+UMD": ["MKT-RF", "SMB", "HML", "UMD"],
    "FF5": ["MKT-RF", "SMB", "HML", "RMW", "CMA"],
    "FF5+UMD": ["MKT-RF", "SMB", "HML", "RMW", "CMA", "UMD"],
}


def default_nw_lags(n_obs: int) -> int:
    """floor(4 * (T / 100) ** (2 / 9))."""
    return int(math.floor(4.0 * (n_obs / 100.0) ** (2.0 / 9.0)))


@dataclass(frozen=True)
class CovSpec:
    """
    Covariance estimator.

    Attributes:
        kind (str): "plain" (homoskedastic OLS) or "nw" (Newey-West HAC).
        lags (Optional[int]): NW lag length; None picks `default_nw_lags(T)`.
    """
    kind: str = "nw"
    lags: Optional[int] = None

    def __post_init__(self):
        if self.kind not in ("plain", "nw"):
            raise ValueError(f"covariance kind must be 'plain' or 'nw', got {self.kind!r}")
        if self.lags is not None and self.lags < 0:
            raise ValueError("NW lags must be >= 0")

    @classmethod
    def plain(cls) -> "CovSpec":
        return cls("plain")

    @classmethod
    def newey_west(cls, lags: Optional[int] = None) -> "CovSpec":
        return cls("nw", lags)

    def resolve_lags(self, n_obs: int) -> int:
        return default_nw_lags(n_obs) if self.lags is None else int(self.lags)

    def tag(self, n_obs: int) -> str:
        return "OLS" if self.kind == "plain" else f"NW(lags={self.resolve_lags(n_obs)})"


@dataclass
class RegressionReport:
    """
    Output of a time-series regression.

    Attributes:
        params (pd.Series): Coefficients by regressor name, intercept as "const".
        bse (pd.Series): Standard errors.
        tvalues (pd.Series): params / bse where bse > 0, else NaN.
        pvalues (pd.Series): Two-sided p-values.
        rsquared (float): R squared.
        rsquared_adj (float): Adjusted R squared.
        nobs (int): Observations used.
        cov_type (str): "OLS" or "NW(lags=L)".
        resid_sd (float): sqrt(SSR / (T - k)).
    """
    params: pd.Series
    bse: pd.Series
    tvalues: pd.Series
    pvalues: pd.Series
    rsquared: float
    rsquared_adj: float
    nobs: int
    cov_type: str
    resid_sd: float
    labels: dict = field(default_factory=dict)

    @property
    def alpha(self) -> float:
        return float(self.params[CONST])

    @property
    def alpha_pct(self) -> float:
        return 100.0 * self.alpha

    def stars(self, name: str, levels: tuple = REGRESSION_STARS) -> str:
        return significance_stars(self.pvalues[name], levels)

    def to_dict(self) -> dict:
        return {
            "params": {k: float(v) for k, v in self.params.items()},
            "bse": {k: float(v) for k, v in self.bse.items()},
            "tvalues": {k: float(v) for k, v in self.tvalues.items()},
            "rsquared": float(self.rsquared),
            "rsquared_adj": float(self.rsquared_adj),
            "nobs": int(self.nobs),
            "cov_type": self.cov_type,
            "resid_sd": float(self.resid_sd),
            **self.labels,
        }


def collinear_columns(design: pd.DataFrame) -> list[str]:
    """Columns that add nothing to the rank of the columns before them."""
    dropped, kept = [], []
    for column in design.columns:
        trial = kept + [column]
        if np.linalg.matrix_rank(design[trial].to_numpy()) < len(trial):
            dropped.append(str(column))
        else:
            kept.append(column)
    return dropped


def _fit(y: np.ndarray, design: pd.DataFrame, cov: CovSpec):
    model = sm.OLS(y, design)
    if cov.kind == "plain":
        return model.fit()
    lags = cov.resolve_lags(len(y))
    return model.fit(cov_type="HAC", cov_kwds={"maxlags": lags, "use_correction": False})


def ols(y: pd.Series, X: Union[pd.DataFrame, pd.Series, None], cov: Optional[CovSpec] = None,
        add_constant: bool = True) -> RegressionReport:
    """
    Least squares of `y` on the named columns of `X` (plus an intercept).

    Rows with any missing value are dropped first.

    Raises:
        InsufficientObservationsError: T <= number of regressors.
        CollinearityError: The design is rank deficient; names the offending columns.
    """
    cov = cov or CovSpec.newey_west()
    if X is None:
        X = pd.DataFrame(index=y.index)
    elif isinstance(X, pd.Series):
        X = X.to_frame()
    data = pd.concat([y.rename("__y__"), X], axis=1, join="inner").dropna()
    design = data.drop(columns="__y__")
    if add_constant:
        design.insert(0, CONST, 1.0)
    k = design.shape[1]
    if k == 0:
        raise ValueError("regression needs at least one regressor")
    if len(data) <= k:
        raise InsufficientObservationsError(f"{len(data)} observations for {k} regressors",
                                            {"nobs": int(len(data)), "k": int(k)})
    if np.linalg.matrix_rank(design.to_numpy()) < k:
        raise CollinearityError(collinear_columns(design))

    result = _fit(data["__y__"].to_numpy(), design, cov)
    params = pd.Series(np.asarray(result.params), index=design.columns)
    bse = pd.Series(np.asarray(result.bse), index=design.columns)
    with np.errstate(divide="ignore", invalid="ignore"):
        tvalues = params / bse.where(bse > 0)
    pvalues = pd.Series(np.asarray(result.pvalues), index=design.columns)
    df_resid = len(data) - k
    return RegressionReport(
        params=params, bse=bse, tvalues=tvalues, pvalues=pvalues.where(bse > 0),
        rsquared=float(result.rsquared), rsquared_adj=float(result.rsquared_adj),
        nobs=int(len(data)), cov_type=cov.tag(len(data)),
        resid_sd=float(np.sqrt(result.ssr / df_resid)),
    )


def mean_with_se(series: pd.Series, cov: Optional[CovSpec] = None) -> tuple[float, float]:
    """Sample mean and its standard error (plain or Newey-West) from a regression on a constant."""
    values = series.dropna()
    cov = cov or CovSpec.newey_west()
    if len(values) < 2:
        return (float(values.mean()) if len(values) else float("nan")), float("nan")
    if values.nunique() == 1:
        return float(values.iloc[0]), 0.0
    report = ols(values, None, cov)
    return float(values.mean()), float(report.bse[CONST])


def alpha_regression(asset: pd.Series, model: str, factors: pd.DataFrame, rf: Optional[pd.Series] = None,
                     long_short: bool = False, cov: Optional[CovSpec] = None) -> RegressionReport:
    """
    Jensen-alpha regression of an asset on one of `FACTOR_MODELS`.

    Bucket returns are turned into excess returns with `rf` (or the "RF"
    column of `factors`); long-short legs are used as they are.

    Raises:
        MissingFactorError: `factors` lacks a column the model needs.
    """
    if model not in FACTOR_MODELS:
        raise ValueError(f"unknown factor model {model!r}; choose from {list(FACTOR_MODELS)}")
    names = FACTOR_MODELS[model]
    missing = [n for n in names if n not in factors.columns]
    if not long_short and rf is None:
        if "RF" in factors.columns:
            rf = factors["RF"]
        else:
            missing.append("RF")
    if missing:
        raise MissingFactorError(missing)
    y = asset if long_short else asset - rf.reindex(asset.index)
    report = ols(y, factors[names], cov)
    report.labels = {"model": model, "long_short": bool(long_short)}
    return report


def spanning_test(target: pd.Series, rhs: pd.DataFrame, cov: Optional[CovSpec] = None) -> RegressionReport:
    """Regress a factor on a set of other factors over their common periods; the intercept is the test."""
    report = ols(target, rhs, cov)
    report.labels = {"target": str(target.name), "rhs": [str(c) for c in rhs.columns]}
    return report
