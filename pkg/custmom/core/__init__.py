from .diagnostics import FlagLog
from .exceptions import (CollinearityError, ConfigError, CustmomError, DegenerateBreakpointsError,
                         DuplicateObservationError, EstimationError, InsufficientObservationsError,
                         MissingFactorError, SchemaError, SyntheticGenerationError)
from .panel import (AnnouncementTable, IngestReport, LinkTable, MarketSeries, RawLinkTable,
                    ReturnPanel)
from .periods import Frequency, PeriodIndex, TradingCalendar, month_label, month_ordinal
