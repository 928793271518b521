"""Deterministic synthetic fleets: labeled load profiles, weather, calendars.

The generator is not a statistical model of real consumption; it produces
the structural signatures each consumer type is classified and forecast by:
industrial shutdowns on holidays/weekends, commercial open-hours peaks with
Saturday trading, residential morning/evening peaks with day-to-day timing
jitter and a mild weather response.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from datetime import date, datetime, timedelta, timezone

import numpy as np

from .classifier import ConsumerType
from .data import (
    DEFAULT_TZ,
    HOUR,
    ConsumerRecord,
    HolidayCalendar,
    LoadSeries,
    SocioEconomicRecord,
    WeatherSeries,
    civil_fields,
    holiday_mask,
)
from .errors import ConfigError, CoverageError

DEFAULT_START = datetime(2021, 1, 4, tzinfo=timezone.utc)


def easter_sunday(year: int) -> date:
    """Gregorian computus (anonymous algorithm)."""
    a = year % 19
    b, c = divmod(year, 100)
    d, e = divmod(b, 4)
    f = (b + 8) // 25
    g = (b - f + 1) // 3
    h = (19 * a + b - d - g + 15) % 30
    i, k = divmod(c, 4)
    l = (32 + 2 * e + 2 * i - h - k) % 7
    m = (a + 11 * h + 22 * l) // 451
    month, day = divmod(h + l - 7 * m + 114, 31)
    return date(year, month, day + 1)


def spanish_holidays(years: range | list[int], region: str = "ES") -> HolidayCalendar:
    """National fixed-date holidays plus Good Friday and Easter Monday."""
    fixed = [(1, 1), (1, 6), (5, 1), (8, 15), (10, 12), (11, 1), (12, 6), (12, 8), (12, 25)]
    dates = set()
    for year in years:
        for month, day in fixed:
            dates.add(date(year, month, day))
        easter = easter_sunday(year)
        dates.add(easter - timedelta(days=2))  # Good Friday
        dates.add(easter + timedelta(days=1))  # Easter Monday
    return HolidayCalendar(frozenset(dates), region=region)


def synthetic_weather(
    zone_id: str,
    start: datetime,
    n_hours: int,
    seed: int = 0,
    mean_temp: float = 14.0,
    annual_amplitude: float = 8.0,
    diurnal_amplitude: float = 4.0,
    noise_std: float = 1.0,
) -> WeatherSeries:
    """Sinusoidal annual + diurnal temperature with seeded noise."""
    rng = np.random.default_rng([seed, 77])
    hours = np.arange(n_hours)
    day_of_year = (start.timetuple().tm_yday - 1 + hours / 24.0) % 365.25
    hour_of_day = (start.hour + hours) % 24
    temp = (
        mean_temp
        - annual_amplitude * np.cos(2 * np.pi * (day_of_year - 15) / 365.25)
        - diurnal_amplitude * np.cos(2 * np.pi * (hour_of_day - 4) / 24.0)
        + rng.normal(0.0, noise_std, n_hours)
    )
    humidity = np.clip(70.0 - 1.2 * (temp - mean_temp) + rng.normal(0.0, 4.0, n_hours), 5.0, 100.0)
    return WeatherSeries(zone_id, start, temp, humidity)


# hour-of-day weight templates (index = civil hour)
_INDUSTRIAL_SHAPE = tuple(
    1.0 if 6 <= h < 22 else 0.25 for h in range(24)
)
_COMMERCIAL_SHAPE = tuple(
    1.0 if 9 <= h < 21 else (0.55 if h in (8, 21) else 0.25) for h in range(24)
)
# town-level residential aggregate: gentle morning/evening humps over a
# substantial base, not the spiky single-household profile
_RESIDENTIAL_SHAPE = tuple(
    0.55
    + 0.5 * float(np.exp(-0.5 * ((h - 7.5) / 1.4) ** 2))
    + 0.7 * float(np.exp(-0.5 * ((h - 20.5) / 1.8) ** 2))
    for h in range(24)
)


@dataclass(frozen=True)
class SynthConfig:
    """Knobs for one synthetic consumer.

    ``saturday_ratio``/``sunday_ratio`` default to ``weekend_ratio`` when
    None; commercial profiles set them apart to reproduce Saturday trading.
    Noise is multiplicative log-normal so generated load stays non-negative.
    """

    consumer_type: ConsumerType
    span_weeks: int = 52
    cadence: timedelta = HOUR
    base_load_kw: float = 100.0
    weekday_ratio: float = 1.0
    weekend_ratio: float = 1.0
    holiday_ratio: float = 1.0
    saturday_ratio: float | None = None
    sunday_ratio: float | None = None
    hourly_shape: tuple[float, ...] = _RESIDENTIAL_SHAPE
    peak_jitter_std_hours: float = 0.0
    temp_sensitivity_kw_per_degc: float = 0.0
    comfort_band_c: tuple[float, float] = (13.0, 21.0)
    noise_std: float = 0.08
    seed: int = 0

    def __post_init__(self):
        if self.span_weeks < 4:
            raise ConfigError("span must be at least 4 weeks (classifier precondition)")
        if len(self.hourly_shape) != 24 or any(w < 0 for w in self.hourly_shape):
            raise ConfigError("hourly_shape needs 24 non-negative weights")
        for name in ("weekday_ratio", "weekend_ratio", "holiday_ratio"):
            if getattr(self, name) < 0:
                raise ConfigError(f"{name} must be >= 0")
        if self.base_load_kw <= 0:
            raise ConfigError("base_load_kw must be positive")


def industrial_config(seed: int = 0, **overrides) -> SynthConfig:
    defaults = dict(
        consumer_type=ConsumerType.INDUSTRIAL,
        base_load_kw=120.0,
        weekday_ratio=1.0,
        weekend_ratio=0.05,
        holiday_ratio=0.04,
        hourly_shape=_INDUSTRIAL_SHAPE,
        noise_std=0.06,
        seed=seed,
    )
    defaults.update(overrides)
    return SynthConfig(**defaults)


def commercial_config(seed: int = 0, **overrides) -> SynthConfig:
    defaults = dict(
        consumer_type=ConsumerType.COMMERCIAL,
        base_load_kw=40.0,
        weekday_ratio=1.0,
        weekend_ratio=0.2,
        saturday_ratio=0.9,
        sunday_ratio=0.15,
        holiday_ratio=0.15,
        hourly_shape=_COMMERCIAL_SHAPE,
        temp_sensitivity_kw_per_degc=0.8,
        noise_std=0.07,
        seed=seed,
    )
    defaults.update(overrides)
    return SynthConfig(**defaults)


def residential_config(seed: int = 0, **overrides) -> SynthConfig:
    defaults = dict(
        consumer_type=ConsumerType.RESIDENTIAL,
        base_load_kw=1.5,
        weekday_ratio=1.0,
        weekend_ratio=1.0,
        holiday_ratio=1.15,
        hourly_shape=_RESIDENTIAL_SHAPE,
        peak_jitter_std_hours=0.6,
        temp_sensitivity_kw_per_degc=0.04,
        noise_std=0.07,
        seed=seed,
    )
    defaults.update(overrides)
    return SynthConfig(**defaults)


def _shape_at(shape: np.ndarray, frac_hour: np.ndarray) -> np.ndarray:
    """Evaluate the 24-point shape with linear interpolation and wraparound."""
    h0 = np.floor(frac_hour).astype(int) % 24
    h1 = (h0 + 1) % 24
    w = frac_hour - np.floor(frac_hour)
    return shape[h0] * (1 - w) + shape[h1] * w


def generate(
    config: SynthConfig,
    cal: HolidayCalendar,
    weather: WeatherSeries,
    start: datetime = DEFAULT_START,
    consumer_id: str = "synth-0",
    zone_id: str = "zone-0",
    tz: str = DEFAULT_TZ,
) -> ConsumerRecord:
    """Generate one labeled consumer; deterministic for a given config+seed."""
    steps_per_hour = HOUR // config.cadence
    n = config.span_weeks * 7 * 24 * steps_per_hour
    end = start + (n - 1) * config.cadence
    if weather.start > start or weather.end < end:
        raise CoverageError(
            f"weather for zone {weather.zone_id!r} does not cover {start}..{end}"
        )
    rng = np.random.default_rng([config.seed, 1009])

    ordinals, _, weekday, _, frac_hour = civil_fields(start, config.cadence, n, tz)
    is_holiday = holiday_mask(start, config.cadence, n, cal, tz, include_weekends=False)

    sat = config.saturday_ratio if config.saturday_ratio is not None else config.weekend_ratio
    sun = config.sunday_ratio if config.sunday_ratio is not None else config.weekend_ratio
    day_ratio = np.where(weekday == 5, sat, np.where(weekday == 6, sun, config.weekday_ratio))
    day_ratio = np.where(is_holiday, config.holiday_ratio, day_ratio)

    shape = np.asarray(config.hourly_shape, dtype=float)
    if config.peak_jitter_std_hours > 0:
        uniq_days, day_index = np.unique(ordinals, return_inverse=True)
        shift = rng.normal(0.0, config.peak_jitter_std_hours, len(uniq_days))
        eval_hour = (frac_hour - shift[day_index]) % 24.0
    else:
        eval_hour = frac_hour
    level = config.base_load_kw * day_ratio * _shape_at(shape, eval_hour)

    if config.temp_sensitivity_kw_per_degc > 0:
        widx = (start - weather.start) // HOUR + np.arange(n) // steps_per_hour
        temp = weather.temperature[widx]
        lo, hi = config.comfort_band_c
        excess = np.maximum(0.0, temp - hi) + np.maximum(0.0, lo - temp)
        # weather response follows occupancy: scale by the open-hours shape
        level = level + config.temp_sensitivity_kw_per_degc * excess * day_ratio * _shape_at(
            shape, eval_hour
        )

    if config.noise_std > 0:
        sigma = config.noise_std
        level = level * np.exp(rng.normal(0.0, sigma, n) - sigma**2 / 2)

    series = LoadSeries(
        consumer_id=consumer_id,
        start=start,
        cadence=config.cadence,
        values=level,
        missing=np.zeros(n, dtype=bool),
    )
    return ConsumerRecord(consumer_id, zone_id, config.consumer_type, series)


@dataclass(frozen=True)
class Fleet:
    """A generated corpus: records plus the covariate data they reference."""

    records: tuple[ConsumerRecord, ...]
    weather: dict[str, WeatherSeries]
    calendar: HolidayCalendar
    socio: dict[str, SocioEconomicRecord] = field(default_factory=dict)

    def weather_for(self, record: ConsumerRecord) -> WeatherSeries:
        return self.weather[record.zone_id]

    def labels(self) -> dict[str, ConsumerType]:
        return {r.consumer_id: r.declared_type for r in self.records}


_BASE_FACTORY = {
    ConsumerType.INDUSTRIAL: industrial_config,
    ConsumerType.COMMERCIAL: commercial_config,
    ConsumerType.RESIDENTIAL: residential_config,
}


def _jitter_config(cfg: SynthConfig, rng: np.random.Generator) -> SynthConfig:
    """Mild per-consumer variation so fleet members are not clones."""
    scale = lambda v, pct: float(v * rng.uniform(1 - pct, 1 + pct))
    return replace(
        cfg,
        base_load_kw=scale(cfg.base_load_kw, 0.3),
        weekday_ratio=scale(cfg.weekday_ratio, 0.05),
        weekend_ratio=scale(cfg.weekend_ratio, 0.1),
        holiday_ratio=scale(cfg.holiday_ratio, 0.1),
        noise_std=scale(cfg.noise_std, 0.2),
    )


def generate_fleet(
    n_per_type: dict[ConsumerType, int],
    base_configs: dict[ConsumerType, SynthConfig] | None = None,
    seed: int = 0,
    span_weeks: int = 52,
    cadence: timedelta = HOUR,
    start: datetime = DEFAULT_START,
    tz: str = DEFAULT_TZ,
) -> Fleet:
    """Generate a labeled fleet with per-consumer seeds derived from ``seed``.

    Industrial and commercial consumers alternate across two shared zones
    each (so aggregation has something to sum); every residential consumer
    gets its own zone with a socio-economic record, mirroring town-level
    statistics.
    """
    for t, count in n_per_type.items():
        if count < 1:
            raise ConfigError(f"need at least one consumer of type {t}")
    years = range(start.year, (start + timedelta(weeks=span_weeks)).year + 1)
    cal = spanish_holidays(years)
    n_hours = span_weeks * 7 * 24 + 24

    master = np.random.SeedSequence(seed)
    records: list[ConsumerRecord] = []
    weather: dict[str, WeatherSeries] = {}
    socio: dict[str, SocioEconomicRecord] = {}

    def zone_weather(zone: str, zseed: int) -> WeatherSeries:
        if zone not in weather:
            weather[zone] = synthetic_weather(zone, start, n_hours, seed=zseed)
        return weather[zone]

    order = [t for t in _BASE_FACTORY if t in n_per_type]
    child_seeds = master.spawn(sum(n_per_type[t] for t in order))
    k = 0
    for ctype in order:
        factory = _BASE_FACTORY[ctype]
        for i in range(n_per_type[ctype]):
            sub = np.random.default_rng(child_seeds[k])
            cseed = int(sub.integers(0, 2**31 - 1))
            base = (base_configs or {}).get(ctype) or factory()
            cfg = replace(
                _jitter_config(base, sub),
                consumer_type=ctype,
                span_weeks=span_weeks,
                cadence=cadence,
                seed=cseed,
            )
            short = ctype.value[:3]
            cid = f"{short}-{i:02d}"
            if ctype is ConsumerType.RESIDENTIAL:
                zone = f"res-town-{i:02d}"
                socio[zone] = SocioEconomicRecord(
                    zone_id=zone,
                    total_population=float(sub.integers(2_000, 80_000)),
                    population_density=float(sub.uniform(50, 4_000)),
                    tsi=float(sub.uniform(-1.5, 1.5)),
                    gdhi=float(sub.uniform(12_000, 26_000)),
                )
            else:
                zone = f"{short}-park-{i % 2}"
            w = zone_weather(zone, zseed=seed * 977 + len(weather))
            records.append(generate(cfg, cal, w, start=start, consumer_id=cid, zone_id=zone, tz=tz))
            k += 1
    return Fleet(tuple(records), weather, cal, socio)
