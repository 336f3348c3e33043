import pytest
import numpy as np
import pandas as pd

from custmom.core.exceptions import CollinearityError, InsufficientObservationsError, MissingFactorError
from custmom.econometrics.regression import (CONST, CovSpec, alpha_regression, default_nw_lags, mean_with_se, ols,
                                             spanning_test)


@pytest.fixture
def data():
    rng = np.random.default_rng(11)
    T = 120
    X = pd.DataFrame({"a": rng.normal(size=T), "b": rng.normal(size=T)})
    e = np.zeros(T)
    shocks = rng.normal(scale=0.5, size=T)
    for t in range(T):
        e[t] = shocks[t] + (0.5 * e[t - 1] if t else 0.0)
    y = pd.Series(0.3 + 1.5 * X["a"] - 0.7 * X["b"] + e, name="y")
    return y, X


def design_of(X):
    return np.column_stack([np.ones(len(X)), X.to_numpy()])


def hac_cov(Z, resid, lags):
    """Bartlett-kernel sandwich without small-sample correction."""
    bread = np.linalg.inv(Z.T @ Z)
    scores = Z * resid[:, None]
    meat = scores.T @ scores
    for lag in range(1, lags + 1):
        weight = 1.0 - lag / (lags + 1.0)
        gamma = scores[lag:].T @ scores[:-lag]
        meat += weight * (gamma + gamma.T)
    return bread @ meat @ bread


def test_default_nw_lags():
    assert default_nw_lags(100) == 4
    assert default_nw_lags(600) == 5
    assert CovSpec.newey_west().tag(100) == "NW(lags=4)"
    assert CovSpec.plain().tag(100) == "OLS"
    with pytest.raises(ValueError):
        CovSpec("robust")


def test_plain_ols_matches_normal_equations(data):
    y, X = data
    report = ols(y, X, CovSpec.plain())
    Z = design_of(X)
    beta = np.linalg.solve(Z.T @ Z, Z.T @ y.to_numpy())
    resid = y.to_numpy() - Z @ beta
    s2 = resid @ resid / (len(y) - 3)
    se = np.sqrt(np.diag(s2 * np.linalg.inv(Z.T @ Z)))
    np.testing.assert_allclose(report.params.to_numpy(), beta, rtol=1e-10)
    np.testing.assert_allclose(report.bse.to_numpy(), se, rtol=1e-10)
    np.testing.assert_allclose(report.tvalues.to_numpy(), beta / se, rtol=1e-10)
    assert list(report.params.index) == [CONST, "a", "b"]
    assert report.resid_sd == pytest.approx(np.sqrt(s2))
    assert report.nobs == 120


def test_newey_west_matches_hac_oracle(data):
    y, X = data
    report = ols(y, X, CovSpec.newey_west(6))
    Z = design_of(X)
    resid = y.to_numpy() - Z @ report.params.to_numpy()
    se = np.sqrt(np.diag(hac_cov(Z, resid, 6)))
    np.testing.assert_allclose(report.bse.to_numpy(), se, rtol=1e-8)
    assert report.cov_type == "NW(lags=6)"


def test_newey_west_zero_lags_is_white(data):
    y, X = data
    report = ols(y, X, CovSpec.newey_west(0))
    Z = design_of(X)
    resid = y.to_numpy() - Z @ report.params.to_numpy()
    bread = np.linalg.inv(Z.T @ Z)
    hc0 = bread @ (Z * resid[:, None] ** 2).T @ Z @ bread
    np.testing.assert_allclose(report.bse.to_numpy(), np.sqrt(np.diag(hc0)), rtol=1e-8)


def test_missing_rows_are_dropped(data):
    y, X = data
    X = X.copy()
    X.loc[3, "a"] = np.nan
    assert ols(y, X).nobs == 119


def test_collinear_design_names_columns(data):
    y, X = data
    X = X.assign(c=2.0 * X["a"])
    with pytest.raises(CollinearityError) as excinfo:
        ols(y, X)
    assert excinfo.value.columns == ["c"]


def test_too_few_observations(data):
    y, X = data
    with pytest.raises(InsufficientObservationsError):
        ols(y.iloc[:3], X.iloc[:3])


def test_mean_with_se():
    series = pd.Series([0.01, 0.03, -0.02, 0.04, 0.00, 0.02])
    mean, se = mean_with_se(series, CovSpec.plain())
    assert mean == pytest.approx(series.mean())
    assert se == pytest.approx(series.std(ddof=1) / np.sqrt(len(series)))
    assert mean_with_se(pd.Series([0.02, 0.02, 0.02])) == (0.02, 0.0)


def test_alpha_regression():
    rng = np.random.default_rng(5)
    T = 60
    factors = pd.DataFrame({"MKT-RF": rng.normal(0.005, 0.04, T), "RF": np.full(T, 0.003)})
    bucket = 0.003 + 0.004 + 1.2 * factors["MKT-RF"] + rng.normal(0, 1e-4, T)
    report = alpha_regression(bucket, "CAPM", factors, cov=CovSpec.newey_west())
    assert report.alpha == pytest.approx(0.004, abs=1e-4)
    assert report.alpha_pct == pytest.approx(0.4, abs=1e-2)
    assert report.params["MKT-RF"] == pytest.approx(1.2, abs=1e-2)
    assert report.stars(CONST) == "***"
    assert report.to_dict()["model"] == "CAPM"

    long_short = alpha_regression(bucket - factors["RF"], "CAPM", factors.drop(columns="RF"), long_short=True)
    assert long_short.alpha == pytest.approx(report.alpha)


def test_alpha_regression_missing_factors():
    factors = pd.DataFrame({"MKT-RF": [0.01, 0.02, 0.03]})
    with pytest.raises(MissingFactorError) as excinfo:
        alpha_regression(pd.Series([0.01, 0.0, 0.02]), "FF3", factors)
    assert excinfo.value.missing == ["SMB", "HML", "RF"]
    assert excinfo.value.exit_code == 5
    with pytest.raises(ValueError):
        alpha_regression(pd.Series([0.01]), "FF7", factors)


def test_spanning_test(data):
    y, X = data
    report = spanning_test(y.rename("CMOM"), X)
    assert report.labels == {"target": "CMOM", "rhs": ["a", "b"]}
    assert report.params[CONST] == pytest.approx(ols(y, X).params[CONST])
