from datetime import date, datetime, timezone

import numpy as np
import pytest

from loadcast.classifier import ConsumerType, classify, profile_stats
from loadcast.data import HOUR, QUARTER
from loadcast.errors import ConfigError
from loadcast.synthgen import (
    DEFAULT_START,
    commercial_config,
    easter_sunday,
    generate,
    generate_fleet,
    industrial_config,
    residential_config,
    spanish_holidays,
    synthetic_weather,
)

CAL = spanish_holidays(range(2021, 2023))


@pytest.fixture(scope="module")
def weather():
    return synthetic_weather("w", DEFAULT_START, 60 * 7 * 24, seed=1)


def test_easter_dates():
    assert easter_sunday(2021) == date(2021, 4, 4)
    assert easter_sunday(2024) == date(2024, 3, 31)


def test_industrial_satisfies_rule_1(weather):
    for seed in (0, 1, 2):
        rec = generate(industrial_config(seed=seed, span_weeks=12), CAL, weather)
        st = profile_stats(rec.load, CAL)
        assert st.c_h < st.c_w / 2
        assert st.c_sat < 2 * st.c_sun
        assert classify(st) is ConsumerType.INDUSTRIAL


def test_commercial_saturday_dominance(weather):
    rec = generate(commercial_config(seed=3, span_weeks=12), CAL, weather)
    st = profile_stats(rec.load, CAL)
    assert st.c_sat > 1.5 * st.c_sun
    assert classify(st) is ConsumerType.COMMERCIAL


def test_zero_noise_zero_jitter_is_weekly_periodic(weather):
    cfg = residential_config(
        seed=9,
        span_weeks=8,
        noise_std=0.0,
        peak_jitter_std_hours=0.0,
        temp_sensitivity_kw_per_degc=0.0,
        holiday_ratio=1.0,
        weekend_ratio=1.0,
    )
    rec = generate(cfg, CAL, weather)
    v = rec.load.values
    lag = 7 * 24
    corr = np.corrcoef(v[:-lag], v[lag:])[0, 1]
    assert corr == pytest.approx(1.0, abs=1e-12)


def test_same_config_and_seed_reproduces(weather):
    cfg = residential_config(seed=4, span_weeks=8)
    a = generate(cfg, CAL, weather)
    b = generate(cfg, CAL, weather)
    np.testing.assert_array_equal(a.load.values, b.load.values)


def test_positivity_and_declared_type(weather):
    for factory in (industrial_config, commercial_config, residential_config):
        cfg = factory(seed=5, span_weeks=8)
        rec = generate(cfg, CAL, weather)
        assert np.all(rec.load.values >= 0)
        assert rec.declared_type is cfg.consumer_type


def test_commercial_temperature_response(weather):
    cfg = commercial_config(seed=6, span_weeks=30)
    rec = generate(cfg, CAL, weather)
    # summer weeks: weeks 24..30 of a Jan start reach July
    i0, i1 = 24 * 7 * 24, 30 * 7 * 24
    load = rec.load.values[i0:i1]
    temp = weather.temperature[i0:i1]
    hi = cfg.comfort_band_c[1]
    excess = np.maximum(0.0, temp - hi)
    assert excess.sum() > 0
    corr = np.corrcoef(load, excess)[0, 1]
    assert corr > 0


def test_span_shorter_than_4_weeks_rejected():
    with pytest.raises(ConfigError):
        industrial_config(span_weeks=3)


def test_15min_cadence_generation(weather):
    cfg = residential_config(seed=2, span_weeks=4, cadence=QUARTER)
    rec = generate(cfg, CAL, weather)
    assert len(rec.load) == 4 * 7 * 24 * 4
    assert rec.load.cadence == QUARTER


class TestFleet:
    def test_counts_and_labels(self):
        fleet = generate_fleet(
            {ConsumerType.INDUSTRIAL: 4, ConsumerType.COMMERCIAL: 3, ConsumerType.RESIDENTIAL: 2},
            seed=0,
            span_weeks=8,
        )
        assert len(fleet.records) == 9
        labels = [r.declared_type for r in fleet.records]
        assert labels.count(ConsumerType.INDUSTRIAL) == 4
        assert labels.count(ConsumerType.COMMERCIAL) == 3
        assert labels.count(ConsumerType.RESIDENTIAL) == 2
        # every zone resolves to weather; residential zones carry socio data
        for r in fleet.records:
            assert r.zone_id in fleet.weather
            if r.declared_type is ConsumerType.RESIDENTIAL:
                assert r.zone_id in fleet.socio

    def test_disjoint_seeds_differ_in_values_not_labels(self):
        kwargs = dict(span_weeks=8)
        a = generate_fleet({ConsumerType.INDUSTRIAL: 2}, seed=1, **kwargs)
        b = generate_fleet({ConsumerType.INDUSTRIAL: 2}, seed=2, **kwargs)
        assert a.labels() == b.labels()
        assert not np.array_equal(a.records[0].load.values, b.records[0].load.values)

    def test_fleet_deterministic(self):
        a = generate_fleet({ConsumerType.RESIDENTIAL: 2}, seed=3, span_weeks=8)
        b = generate_fleet({ConsumerType.RESIDENTIAL: 2}, seed=3, span_weeks=8)
        for ra, rb in zip(a.records, b.records):
            np.testing.assert_array_equal(ra.load.values, rb.load.values)

    def test_label_consistency_at_defaults(self, small_fleet):
        hits = 0
        for r in small_fleet.records:
            if classify(profile_stats(r.load, small_fleet.calendar)) is r.declared_type:
                hits += 1
        assert hits / len(small_fleet.records) >= 0.9
