from .descriptive import CorrelationMatrix, correlation_matrix, sharpe_ratio, summary_stats
from .fama_macbeth import FMReport, fama_macbeth
from .regression import (FACTOR_MODELS, CovSpec, RegressionReport, alpha_regression, default_nw_lags,
                         mean_with_se, ols, spanning_test)
