from .factor_factory import FactorSeries, build_factor, growth_of_dollar, scale_returns
from .sorter import (BreakpointSpec, BreakpointUniverse, DoubleSortResult, PortfolioSeries, Weighting,
                     assign_buckets, compute_breakpoints, conditional_double_sort, form_portfolios,
                     restrict_by_ratio)
