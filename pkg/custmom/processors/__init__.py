from .link_engine import (contemporaneous_link_correlation, customer_aggregates, customer_momentum,
                          customer_signal, lag_links, random_pair_correlation, relative_size_signal)
from .signal_lab import (car3_events, compute_car3, compute_nav, compute_sue, earnings_signal, nav_signal,
                         standard_characteristics, sue_events, window_return, window_returns, winsorize)
from .signal_output import CustomerAggregate, LagWindow, SignalPanel, aggregates_to_long
