from .ingest import (ingest_announcements, ingest_factors, ingest_firm_table, ingest_links,
                     ingest_market, ingest_returns, ingest_series)
from .store import coverage_report, filter_panel
