from datetime import datetime, timedelta, timezone

import numpy as np
import pytest

from loadcast.classifier import ConsumerType
from loadcast.data import HOUR, QUARTER, HolidayCalendar, LoadSeries
from loadcast.synthgen import DEFAULT_START, generate_fleet, spanish_holidays, synthetic_weather

UTC = timezone.utc


def make_series(values, start=None, cadence=HOUR, consumer_id="c-0", missing=None):
    values = np.asarray(values, dtype=float)
    if start is None:
        start = datetime(2021, 1, 4, tzinfo=UTC)
    if missing is None:
        missing = np.isnan(values)
    return LoadSeries(consumer_id, start, cadence, values, np.asarray(missing, dtype=bool))


@pytest.fixture(scope="session")
def madrid_calendar():
    return spanish_holidays(range(2021, 2023))


@pytest.fixture(scope="session")
def small_fleet():
    """3 consumers per type, 12 weeks hourly; enough for classifier tests."""
    return generate_fleet(
        {ConsumerType.INDUSTRIAL: 3, ConsumerType.COMMERCIAL: 3, ConsumerType.RESIDENTIAL: 3},
        seed=11,
        span_weeks=12,
    )


@pytest.fixture(scope="session")
def weather_year():
    return synthetic_weather("wz", DEFAULT_START, 370 * 24, seed=3)
