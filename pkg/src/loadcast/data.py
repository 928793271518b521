"""Time-series data model: load/weather series, calendars, ingestion, alignment.

Timestamps are stored in UTC on uniform grids; civil-date quantities
(weekday, hour, holiday flags) are derived in a configurable IANA timezone,
Europe/Madrid by default, because calendar effects are local.
"""

from __future__ import annotations

import csv
import functools
from dataclasses import dataclass, field
from datetime import date, datetime, timedelta, timezone
from pathlib import Path
from zoneinfo import ZoneInfo

import numpy as np

from .errors import (
    AlignmentError,
    CoverageError,
    DataError,
    OrderingError,
    ParseError,
    QualityError,
)

QUARTER = timedelta(minutes=15)
HOUR = timedelta(hours=1)
DEFAULT_TZ = "Europe/Madrid"

_CADENCES = (QUARTER, HOUR)


def parse_timestamp(text: str, row: int | None = None) -> datetime:
    """Parse an ISO-8601 timestamp as UTC (naive input is taken as UTC)."""
    try:
        ts = datetime.fromisoformat(text.strip().replace("Z", "+00:00"))
    except ValueError as exc:
        raise ParseError(f"invalid timestamp {text!r}: {exc}", row=row) from None
    if ts.tzinfo is None:
        return ts.replace(tzinfo=timezone.utc)
    return ts.astimezone(timezone.utc)


def format_timestamp(ts: datetime) -> str:
    return ts.astimezone(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.asarray(a)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class LoadSeries:
    """Uniformly sampled consumption readings in kW.

    Index ``i`` maps to ``start + i * cadence``; missing grid points carry
    NaN in ``values`` and True in ``missing``. ``support`` (optional) records
    how many quarter-hour samples backed each value after resampling.
    """

    consumer_id: str
    start: datetime
    cadence: timedelta
    values: np.ndarray
    missing: np.ndarray
    support: np.ndarray | None = None

    def __post_init__(self):
        if self.cadence not in _CADENCES:
            raise DataError(f"cadence must be 15 min or 60 min, got {self.cadence}")
        if self.start.tzinfo is None:
            raise DataError("series start must be timezone-aware UTC")
        values = np.asarray(self.values, dtype=float)
        missing = np.asarray(self.missing, dtype=bool)
        if values.shape != missing.shape or values.ndim != 1:
            raise DataError("values and missing-mask must be equal-length 1-D arrays")
        present = values[~missing]
        if np.any(~np.isfinite(present)) or np.any(present < 0):
            raise DataError("non-missing load values must be finite and >= 0")
        values = values.copy()
        values[missing] = np.nan
        object.__setattr__(self, "values", _readonly(values))
        object.__setattr__(self, "missing", _readonly(missing))
        if self.support is not None:
            object.__setattr__(self, "support", _readonly(np.asarray(self.support)))

    def __len__(self) -> int:
        return len(self.values)

    @property
    def end(self) -> datetime:
        """Timestamp of the last grid point."""
        return self.start + (len(self) - 1) * self.cadence

    def timestamp_at(self, i: int) -> datetime:
        return self.start + i * self.cadence

    def timestamps(self) -> list[datetime]:
        return [self.start + i * self.cadence for i in range(len(self))]

    def index_of(self, ts: datetime) -> int:
        """Grid index of ``ts``; raises if off-grid or out of range."""
        delta = ts.astimezone(timezone.utc) - self.start
        steps, rem = divmod(delta, self.cadence)
        if rem or not 0 <= steps < len(self):
            raise AlignmentError(f"{ts} is not a grid point of series {self.consumer_id!r}")
        return int(steps)

    def value_at(self, ts: datetime) -> float:
        return float(self.values[self.index_of(ts)])

    def slice(self, i0: int, i1: int) -> "LoadSeries":
        """Contiguous sub-series covering grid indices [i0, i1)."""
        if not 0 <= i0 < i1 <= len(self):
            raise DataError(f"bad slice [{i0}, {i1}) for length {len(self)}")
        return LoadSeries(
            consumer_id=self.consumer_id,
            start=self.start + i0 * self.cadence,
            cadence=self.cadence,
            values=self.values[i0:i1].copy(),
            missing=self.missing[i0:i1].copy(),
            support=None if self.support is None else self.support[i0:i1].copy(),
        )


@dataclass(frozen=True)
class WeatherSeries:
    """Hourly temperature (degC) and relative humidity (percent) for one zone."""

    zone_id: str
    start: datetime
    temperature: np.ndarray
    humidity: np.ndarray

    cadence = HOUR

    def __post_init__(self):
        temp = np.asarray(self.temperature, dtype=float)
        hum = np.asarray(self.humidity, dtype=float)
        if temp.shape != hum.shape or temp.ndim != 1:
            raise DataError("temperature and humidity must be equal-length 1-D arrays")
        ok = ~np.isnan(hum)
        if np.any((hum[ok] < 0) | (hum[ok] > 100)):
            raise DataError("humidity must lie within [0, 100]")
        object.__setattr__(self, "temperature", _readonly(temp))
        object.__setattr__(self, "humidity", _readonly(hum))

    def __len__(self) -> int:
        return len(self.temperature)

    @property
    def end(self) -> datetime:
        return self.start + (len(self) - 1) * HOUR


@dataclass(frozen=True)
class HolidayCalendar:
    """Set of public-holiday civil dates plus a weekend policy flag.

    ``weekend_as_holiday`` controls only the derived holiday *flag*
    (``is_holiday``); classification statistics always use the public
    holidays alone.
    """

    dates: frozenset[date]
    region: str = ""
    weekend_as_holiday: bool = False

    def is_public_holiday(self, d: date) -> bool:
        return d in self.dates

    def is_holiday(self, d: date) -> bool:
        if d in self.dates:
            return True
        return self.weekend_as_holiday and d.weekday() >= 5

    def with_weekends(self, flag: bool) -> "HolidayCalendar":
        return HolidayCalendar(self.dates, self.region, flag)


@dataclass(frozen=True)
class SocioEconomicRecord:
    """Static socio-economic descriptors of a zone."""

    zone_id: str
    total_population: float
    population_density: float
    tsi: float
    gdhi: float

    def __post_init__(self):
        if self.total_population <= 0 or self.population_density <= 0:
            raise DataError("population and density must be positive")

    def as_features(self) -> dict[str, float]:
        return {
            "population": float(self.total_population),
            "density": float(self.population_density),
            "tsi": float(self.tsi),
            "gdhi": float(self.gdhi),
        }


@dataclass(frozen=True)
class ConsumerRecord:
    """One consumer: identity, zone, optional ground-truth type, load series."""

    consumer_id: str
    zone_id: str
    declared_type: "object | None"  # ConsumerType; kept loose to avoid an import cycle
    load: LoadSeries


# ---------------------------------------------------------------------------
# Civil-calendar derivation


@functools.lru_cache(maxsize=128)
def _civil_fields_cached(start: datetime, cadence: timedelta, n: int, tz: str):
    zone = ZoneInfo(tz)
    ordinals = np.empty(n, dtype=np.int64)
    month = np.empty(n, dtype=np.int16)
    weekday = np.empty(n, dtype=np.int8)
    hour = np.empty(n, dtype=np.int16)
    frac_hour = np.empty(n, dtype=float)
    ts = start
    for i in range(n):
        local = ts.astimezone(zone)
        ordinals[i] = local.toordinal()
        month[i] = local.month
        weekday[i] = local.weekday()
        hour[i] = local.hour
        frac_hour[i] = local.hour + local.minute / 60.0
        ts += cadence
    for a in (ordinals, month, weekday, hour, frac_hour):
        a.setflags(write=False)
    return ordinals, month, weekday, hour, frac_hour


def civil_fields(start: datetime, cadence: timedelta, n: int, tz: str = DEFAULT_TZ):
    """Per-grid-point civil date ordinal, month, weekday (Mon=0), hour and
    fractional hour in the given timezone."""
    return _civil_fields_cached(start.astimezone(timezone.utc), cadence, n, tz)


def holiday_mask(
    start: datetime,
    cadence: timedelta,
    n: int,
    cal: HolidayCalendar,
    tz: str = DEFAULT_TZ,
    include_weekends: bool | None = None,
) -> np.ndarray:
    """Boolean holiday flag per grid point.

    ``include_weekends`` overrides the calendar's own policy when given.
    """
    ordinals, _, weekday, _, _ = civil_fields(start, cadence, n, tz)
    weekends = include_weekends if include_weekends is not None else cal.weekend_as_holiday
    uniq = np.unique(ordinals)
    flagged = np.array([date.fromordinal(int(o)) in cal.dates for o in uniq])
    mask = flagged[np.searchsorted(uniq, ordinals)]
    if weekends:
        mask = mask | (weekday >= 5)
    return mask


# ---------------------------------------------------------------------------
# File ingestion


def _read_rows(path: str | Path, expected_header: list[str]) -> list[list[str]]:
    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError(f"{path} is empty") from None
        header = [h.strip().lower() for h in header]
        if header != expected_header:
            raise ParseError(
                f"{path} header {header} does not match expected {expected_header}"
            )
        return [row for row in reader if row and any(cell.strip() for cell in row)]


def ingest_load_csv(
    path: str | Path,
    cadence: timedelta,
    consumer_id: str | None = None,
    max_missing_fraction: float = 0.20,
) -> LoadSeries:
    """Read a ``timestamp,kw`` CSV onto a uniform grid at ``cadence``.

    The grid runs from the first to the last timestamp; grid points with no
    row are marked missing. Rows must be sorted ascending, on-grid and free
    of duplicates.
    """
    if cadence not in _CADENCES:
        raise DataError(f"cadence must be 15 min or 60 min, got {cadence}")
    rows = _read_rows(path, ["timestamp", "kw"])
    if not rows:
        raise ParseError(f"{path} contains no data rows")
    stamps: list[datetime] = []
    values: list[float] = []
    for i, row in enumerate(rows, start=1):
        if len(row) != 2:
            raise ParseError(f"expected 2 columns, got {len(row)}", row=i)
        ts = parse_timestamp(row[0], row=i)
        try:
            kw = float(row[1])
        except ValueError:
            raise ParseError(f"invalid kW value {row[1]!r}", row=i) from None
        if not np.isfinite(kw) or kw < 0:
            raise ParseError(f"kW value must be finite and >= 0, got {kw}", row=i)
        if stamps:
            if ts == stamps[-1]:
                raise OrderingError(f"duplicate timestamp {format_timestamp(ts)} at row {i}")
            if ts < stamps[-1]:
                raise OrderingError(f"timestamps not ascending at row {i}")
        stamps.append(ts)
        values.append(kw)

    start = stamps[0]
    n = (stamps[-1] - start) // cadence + 1
    grid = np.full(n, np.nan)
    missing = np.ones(n, dtype=bool)
    for i, (ts, kw) in enumerate(zip(stamps, values), start=1):
        steps, rem = divmod(ts - start, cadence)
        if rem:
            raise ParseError(
                f"timestamp {format_timestamp(ts)} not aligned to {cadence}", row=i
            )
        grid[steps] = kw
        missing[steps] = False

    frac = missing.mean()
    if frac > max_missing_fraction:
        raise QualityError(
            f"{frac:.1%} of grid points missing exceeds the {max_missing_fraction:.0%} limit"
        )
    cid = consumer_id if consumer_id is not None else Path(path).stem
    return LoadSeries(cid, start, cadence, grid, missing)


def write_load_csv(series: LoadSeries, path: str | Path) -> None:
    """Write the non-missing points back out in the ingestion schema."""
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["timestamp", "kw"])
        for i in range(len(series)):
            if not series.missing[i]:
                writer.writerow([format_timestamp(series.timestamp_at(i)), repr(float(series.values[i]))])


def ingest_weather_csv(path: str | Path, zone_id: str | None = None) -> WeatherSeries:
    """Read a ``timestamp,temp_c,humidity_pct`` CSV onto an hourly grid."""
    rows = _read_rows(path, ["timestamp", "temp_c", "humidity_pct"])
    if not rows:
        raise ParseError(f"{path} contains no data rows")
    stamps: list[datetime] = []
    temps: list[float] = []
    hums: list[float] = []
    for i, row in enumerate(rows, start=1):
        if len(row) != 3:
            raise ParseError(f"expected 3 columns, got {len(row)}", row=i)
        ts = parse_timestamp(row[0], row=i)
        try:
            t, h = float(row[1]), float(row[2])
        except ValueError:
            raise ParseError(f"invalid weather values {row[1:]!r}", row=i) from None
        if stamps and ts <= stamps[-1]:
            raise OrderingError(f"timestamps not strictly ascending at row {i}")
        stamps.append(ts)
        temps.append(t)
        hums.append(h)
    start = stamps[0]
    n = (stamps[-1] - start) // HOUR + 1
    temp = np.full(n, np.nan)
    hum = np.full(n, np.nan)
    for i, ts in enumerate(stamps, start=1):
        steps, rem = divmod(ts - start, HOUR)
        if rem:
            raise ParseError(f"weather timestamp {format_timestamp(ts)} not on hourly grid", row=i)
        temp[steps] = temps[i - 1]
        hum[steps] = hums[i - 1]
    zid = zone_id if zone_id is not None else Path(path).stem
    return WeatherSeries(zid, start, temp, hum)


def write_weather_csv(series: WeatherSeries, path: str | Path) -> None:
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["timestamp", "temp_c", "humidity_pct"])
        for i in range(len(series)):
            if np.isnan(series.temperature[i]) and np.isnan(series.humidity[i]):
                continue
            ts = series.start + i * HOUR
            writer.writerow(
                [format_timestamp(ts), repr(float(series.temperature[i])), repr(float(series.humidity[i]))]
            )


def read_holiday_file(path: str | Path, region: str = "", weekend_as_holiday: bool = False) -> HolidayCalendar:
    """Read one ``YYYY-MM-DD`` per line; ``#`` starts a comment."""
    dates: set[date] = set()
    for i, line in enumerate(Path(path).read_text().splitlines(), start=1):
        text = line.split("#", 1)[0].strip()
        if not text:
            continue
        try:
            dates.add(date.fromisoformat(text))
        except ValueError:
            raise ParseError(f"invalid holiday date {text!r}", row=i) from None
    return HolidayCalendar(frozenset(dates), region=region, weekend_as_holiday=weekend_as_holiday)


def write_holiday_file(cal: HolidayCalendar, path: str | Path) -> None:
    lines = [d.isoformat() for d in sorted(cal.dates)]
    Path(path).write_text("\n".join(lines) + "\n")


def ingest_socio_csv(path: str | Path) -> dict[str, SocioEconomicRecord]:
    """Read ``zone_id,population,density,tsi,gdhi`` rows keyed by zone."""
    rows = _read_rows(path, ["zone_id", "population", "density", "tsi", "gdhi"])
    out: dict[str, SocioEconomicRecord] = {}
    for i, row in enumerate(rows, start=1):
        if len(row) != 5:
            raise ParseError(f"expected 5 columns, got {len(row)}", row=i)
        zone = row[0].strip()
        if zone in out:
            raise ParseError(f"duplicate zone_id {zone!r}", row=i)
        try:
            pop, dens, tsi, gdhi = (float(v) for v in row[1:])
        except ValueError:
            raise ParseError(f"invalid numeric values {row[1:]!r}", row=i) from None
        out[zone] = SocioEconomicRecord(zone, pop, dens, tsi, gdhi)
    return out


def write_socio_csv(records: dict[str, SocioEconomicRecord], path: str | Path) -> None:
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["zone_id", "population", "density", "tsi", "gdhi"])
        for zone in sorted(records):
            r = records[zone]
            writer.writerow([zone, repr(r.total_population), repr(r.population_density), repr(r.tsi), repr(r.gdhi)])


# ---------------------------------------------------------------------------
# Resampling and covariate alignment


def resample_to_hourly(series: LoadSeries) -> LoadSeries:
    """Average quarter-hour readings into hours.

    Each hour is the mean of its available quarters; an hour with all four
    missing stays missing. ``support`` on the result counts contributing
    quarters per hour.
    """
    if series.cadence != QUARTER:
        raise DataError("resample_to_hourly expects a 15-minute series")
    offset = series.start.minute // 15  # quarters into the first hour
    hour_start = series.start - timedelta(minutes=15 * offset)
    n_hours = (offset + len(series) + 3) // 4
    bucket = (np.arange(len(series)) + offset) // 4
    present = ~series.missing
    sums = np.bincount(bucket[present], weights=series.values[present], minlength=n_hours)
    counts = np.bincount(bucket[present], minlength=n_hours)
    values = np.full(n_hours, np.nan)
    nonzero = counts > 0
    values[nonzero] = sums[nonzero] / counts[nonzero]
    return LoadSeries(
        consumer_id=series.consumer_id,
        start=hour_start,
        cadence=HOUR,
        values=values,
        missing=~nonzero,
        support=counts.astype(np.int8),
    )


@dataclass(frozen=True)
class AlignedTable:
    """One row per load timestamp with target, weather and calendar covariates.

    All covariates are known in advance of the target (weather is treated as
    a future-known proxy), so any forecast horizon may consume them.
    """

    consumer_id: str
    start: datetime
    cadence: timedelta
    target: np.ndarray
    missing: np.ndarray
    temperature: np.ndarray
    humidity: np.ndarray
    month: np.ndarray
    weekday: np.ndarray
    hour: np.ndarray
    holiday: np.ndarray
    tz: str = DEFAULT_TZ
    socio: dict[str, float] | None = None
    timestamps: np.ndarray = field(default=None, repr=False)  # datetime64[s], derived

    def __post_init__(self):
        n = len(self.target)
        for name in ("missing", "temperature", "humidity", "month", "weekday", "hour", "holiday"):
            if len(getattr(self, name)) != n:
                raise DataError(f"column {name} length mismatch")
        if self.timestamps is None:
            base = np.datetime64(self.start.astimezone(timezone.utc).replace(tzinfo=None), "s")
            step = np.timedelta64(int(self.cadence.total_seconds()), "s")
            object.__setattr__(self, "timestamps", base + step * np.arange(n))

    def __len__(self) -> int:
        return len(self.target)

    def index_of(self, ts: datetime) -> int:
        delta = ts.astimezone(timezone.utc) - self.start
        steps, rem = divmod(delta, self.cadence)
        if rem or not 0 <= steps < len(self):
            raise AlignmentError(f"{ts} is not a row of this table")
        return int(steps)

    def slice(self, i0: int, i1: int) -> "AlignedTable":
        if not 0 <= i0 < i1 <= len(self):
            raise DataError(f"bad slice [{i0}, {i1}) for length {len(self)}")
        return AlignedTable(
            consumer_id=self.consumer_id,
            start=self.start + i0 * self.cadence,
            cadence=self.cadence,
            target=self.target[i0:i1],
            missing=self.missing[i0:i1],
            temperature=self.temperature[i0:i1],
            humidity=self.humidity[i0:i1],
            month=self.month[i0:i1],
            weekday=self.weekday[i0:i1],
            hour=self.hour[i0:i1],
            holiday=self.holiday[i0:i1],
            tz=self.tz,
            socio=self.socio,
        )


def align_covariates(
    load: LoadSeries,
    weather: WeatherSeries,
    cal: HolidayCalendar,
    socio: SocioEconomicRecord | None = None,
    tz: str = DEFAULT_TZ,
    ffill_tolerance: timedelta = timedelta(hours=3),
) -> AlignedTable:
    """Build the per-timestamp covariate table for one consumer.

    Hourly weather is step-interpolated onto the load grid (each hourly
    value repeats across its hour); gaps are forward-filled up to
    ``ffill_tolerance`` and anything longer is a coverage error.
    """
    n = len(load)
    # position of each load timestamp on the weather grid, rounded down
    first = (load.start - weather.start) // HOUR
    steps_per_hour = HOUR // load.cadence
    widx = first + np.arange(n) // steps_per_hour
    if load.start < weather.start:
        raise CoverageError(
            f"weather for zone {weather.zone_id!r} starts {weather.start}, "
            f"after load start {load.start}"
        )

    max_back = int(ffill_tolerance // HOUR)
    temp = np.full(n, np.nan)
    hum = np.full(n, np.nan)
    wt, wh = weather.temperature, weather.humidity
    m = len(weather)
    filled = np.zeros(n, dtype=bool)
    for back in range(max_back + 1):
        idx = widx - back
        usable = (~filled) & (idx >= 0) & (idx < m)
        if not usable.any():
            continue
        got = usable.copy()
        got[usable] = ~np.isnan(wt[idx[usable]])
        temp[got] = wt[idx[got]]
        hum[got] = wh[idx[got]]
        filled |= got
    if not filled.all():
        i = int(np.argmin(filled))
        gap_at = load.timestamp_at(i)
        raise CoverageError(
            f"weather gap at {format_timestamp(gap_at)} exceeds the "
            f"{ffill_tolerance} forward-fill tolerance"
        )

    _, month, weekday, hour, _ = civil_fields(load.start, load.cadence, n, tz)
    holi = holiday_mask(load.start, load.cadence, n, cal, tz)
    return AlignedTable(
        consumer_id=load.consumer_id,
        start=load.start,
        cadence=load.cadence,
        target=load.values.copy(),
        missing=load.missing.copy(),
        temperature=temp,
        humidity=hum,
        month=month.astype(np.int16),
        weekday=weekday.astype(np.int8),
        hour=hour.astype(np.int16),
        holiday=holi.astype(np.int8),
        tz=tz,
        socio=None if socio is None else socio.as_features(),
    )
