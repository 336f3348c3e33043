import pytest
import pandas as pd

from custmom.core.periods import (Frequency, PeriodIndex, TradingCalendar, month_label, month_ordinal,
                                  month_ordinals, parse_month)


@pytest.fixture
def calendar():
    # Friday 2 Jan 2015 through Friday 9 Jan 2015, weekend skipped
    return TradingCalendar(["2015-01-02", "2015-01-05", "2015-01-06", "2015-01-07", "2015-01-08", "2015-01-09"])


def test_month_ordinal_round_trip():
    ordinal = month_ordinal(1980, 6)
    assert ordinal == 1980 * 12 + 5
    assert month_label(ordinal) == "1980-06"
    assert parse_month("1980-06") == ordinal
    assert parse_month("1980-06-30") == ordinal


def test_month_ordinals_flag_garbage():
    ords = month_ordinals(["1999-12-31", "not a date", "2000-01"])
    assert list(ords) == [1999 * 12 + 11, -1, 2000 * 12]


def test_parse_month_rejects_garbage():
    with pytest.raises(ValueError):
        parse_month("13/2001")


def test_monthly_shift_crosses_year():
    period = PeriodIndex.monthly("1999-11")
    assert period.shift(3).calendar_label == "2000-02"
    assert period.shift(-11).calendar_label == "1998-12"
    assert Frequency.MONTHLY.periods_per_year == 12


def test_daily_ordinals_skip_weekends(calendar):
    friday = PeriodIndex.daily("2015-01-02", calendar)
    monday = friday.shift(1, calendar)
    assert monday.calendar_label == "2015-01-05"
    assert monday.ordinal == friday.ordinal + 1


def test_daily_period_rejects_non_trading_day(calendar):
    with pytest.raises(ValueError):
        PeriodIndex.daily("2015-01-03", calendar)
    with pytest.raises(ValueError):
        PeriodIndex.daily("2015-01-02", calendar).shift(1)


def test_calendar_lookups(calendar):
    assert calendar.ordinal("2015-01-04") is None
    assert calendar.shift_forward("2015-01-03") == 1
    assert calendar.shift_forward("2015-02-01") is None
    ords = calendar.ordinals(pd.DatetimeIndex(["2015-01-06", "2015-01-10"]))
    assert list(ords) == [2, -1]
    assert calendar.day_span(month_ordinal(2015, 1), month_ordinal(2015, 1)) == (0, 5)
    assert calendar.day_span(month_ordinal(2015, 2), month_ordinal(2015, 3)) is None


def test_calendar_must_increase():
    with pytest.raises(ValueError):
        TradingCalendar(["2015-01-05", "2015-01-02"])


def test_calendar_csv_round_trip(calendar, tmp_path):
    path = tmp_path / "calendar.csv"
    calendar.to_csv(str(path))
    assert TradingCalendar.from_csv(str(path)) == calendar
