from datetime import date, datetime, timedelta, timezone

import numpy as np
import pytest

from loadcast.data import (
    HOUR,
    QUARTER,
    HolidayCalendar,
    LoadSeries,
    SocioEconomicRecord,
    WeatherSeries,
    align_covariates,
    ingest_load_csv,
    ingest_socio_csv,
    ingest_weather_csv,
    read_holiday_file,
    resample_to_hourly,
    write_holiday_file,
    write_load_csv,
    write_socio_csv,
    write_weather_csv,
)
from loadcast.errors import (
    CoverageError,
    DataError,
    OrderingError,
    ParseError,
    QualityError,
)

from conftest import make_series

UTC = timezone.utc
T0 = datetime(2021, 3, 1, tzinfo=UTC)


def write_csv(path, rows, header="timestamp,kw"):
    path.write_text(header + "\n" + "\n".join(rows) + "\n")
    return path


class TestIngestLoad:
    def test_identity_ingestion(self, tmp_path):
        rows = [
            "2021-03-01T00:00:00Z,1.0",
            "2021-03-01T00:15:00Z,2.0",
            "2021-03-01T00:30:00Z,3.0",
            "2021-03-01T00:45:00Z,4.0",
        ]
        s = ingest_load_csv(write_csv(tmp_path / "a.csv", rows), QUARTER)
        assert len(s) == 4
        assert not s.missing.any()
        np.testing.assert_array_equal(s.values, [1.0, 2.0, 3.0, 4.0])
        assert s.start == T0

    def test_absent_slot_marked_missing(self, tmp_path):
        # one hour span with the 00:30 slot absent: 5 grid points, 1 missing
        rows = [
            "2021-03-01T00:00:00Z,1.0",
            "2021-03-01T00:15:00Z,2.0",
            "2021-03-01T00:45:00Z,4.0",
            "2021-03-01T01:00:00Z,5.0",
        ]
        s = ingest_load_csv(write_csv(tmp_path / "a.csv", rows), QUARTER)
        assert len(s) == 5
        assert s.missing.sum() == 1
        assert s.missing[2]
        assert np.isnan(s.values[2])

    def test_invalid_month_cites_row_1(self, tmp_path):
        rows = ["2021-13-01T00:00:00Z,1.0"]
        with pytest.raises(ParseError) as err:
            ingest_load_csv(write_csv(tmp_path / "a.csv", rows), QUARTER)
        assert err.value.row == 1
        assert "row 1" in str(err.value)

    def test_duplicate_timestamp_rejected(self, tmp_path):
        rows = ["2021-03-01T00:00:00Z,1.0", "2021-03-01T00:00:00Z,2.0"]
        with pytest.raises(OrderingError):
            ingest_load_csv(write_csv(tmp_path / "a.csv", rows), QUARTER)

    def test_non_monotone_rejected(self, tmp_path):
        rows = ["2021-03-01T01:00:00Z,1.0", "2021-03-01T00:00:00Z,2.0"]
        with pytest.raises(OrderingError):
            ingest_load_csv(write_csv(tmp_path / "a.csv", rows), HOUR)

    def test_bad_value_cites_row(self, tmp_path):
        rows = ["2021-03-01T00:00:00Z,1.0", "2021-03-01T00:15:00Z,oops"]
        with pytest.raises(ParseError) as err:
            ingest_load_csv(write_csv(tmp_path / "a.csv", rows), QUARTER)
        assert err.value.row == 2

    def test_negative_value_rejected(self, tmp_path):
        rows = ["2021-03-01T00:00:00Z,-1.0"]
        with pytest.raises(ParseError):
            ingest_load_csv(write_csv(tmp_path / "a.csv", rows), QUARTER)

    def test_off_grid_timestamp_rejected(self, tmp_path):
        rows = ["2021-03-01T00:00:00Z,1.0", "2021-03-01T00:07:00Z,2.0"]
        with pytest.raises(ParseError, match="not aligned"):
            ingest_load_csv(write_csv(tmp_path / "a.csv", rows), QUARTER)

    def test_quality_threshold(self, tmp_path):
        # 2 present of 13 grid points -> 84% missing
        rows = ["2021-03-01T00:00:00Z,1.0", "2021-03-01T03:00:00Z,1.0"]
        with pytest.raises(QualityError):
            ingest_load_csv(write_csv(tmp_path / "a.csv", rows), QUARTER)
        s = ingest_load_csv(
            write_csv(tmp_path / "b.csv", rows), QUARTER, max_missing_fraction=0.9
        )
        assert len(s) == 13

    def test_round_trip_values_and_mask(self, tmp_path):
        values = [1.25, np.nan, 3.0, 0.0, 5.5]
        s = make_series(values, cadence=QUARTER)
        path = tmp_path / "rt.csv"
        write_load_csv(s, path)
        s2 = ingest_load_csv(path, QUARTER, consumer_id=s.consumer_id)
        np.testing.assert_array_equal(s.missing, s2.missing)
        np.testing.assert_array_equal(s.values[~s.missing], s2.values[~s2.missing])
        assert s.start == s2.start


class TestResample:
    def test_constant_mean(self):
        s = make_series([1.0, 1.0, 1.0, 1.0], cadence=QUARTER)
        h = resample_to_hourly(s)
        assert len(h) == 1 and h.values[0] == 1.0

    def test_arithmetic_mean(self):
        s = make_series([2.0, 4.0, 6.0, 8.0], cadence=QUARTER)
        assert resample_to_hourly(s).values[0] == 5.0

    def test_partial_support(self):
        s = make_series([3.0, np.nan, np.nan, np.nan], cadence=QUARTER)
        h = resample_to_hourly(s)
        assert h.values[0] == 3.0
        assert h.support[0] == 1

    def test_all_missing_hour_stays_missing(self):
        s = make_series([np.nan] * 4 + [2.0] * 4, cadence=QUARTER)
        h = resample_to_hourly(s)
        assert h.missing[0] and not h.missing[1]

    def test_energy_preserved_over_complete_hours(self):
        rng = np.random.default_rng(0)
        vals = rng.uniform(0, 10, 24 * 4)
        s = make_series(vals, cadence=QUARTER)
        h = resample_to_hourly(s)
        assert np.isclose(h.values.sum() * 4, vals.sum(), rtol=1e-12)

    def test_rejects_hourly_input(self):
        with pytest.raises(DataError):
            resample_to_hourly(make_series([1.0] * 30 * 24, cadence=HOUR))


def hourly_weather(start, n, temp0=10.0):
    return WeatherSeries("z", start, np.full(n, temp0) + np.arange(n) % 5, np.full(n, 60.0))


class TestAlign:
    def test_one_to_one_rowcount(self, madrid_calendar):
        s = make_series(np.arange(48) + 1.0, start=T0, cadence=HOUR)
        w = hourly_weather(T0, 48)
        t = align_covariates(s, w, madrid_calendar)
        assert len(t) == 48

    def test_step_interpolation_repeats_four_times(self, madrid_calendar):
        s = make_series(np.ones(16), start=T0, cadence=QUARTER)
        w = hourly_weather(T0, 5)
        t = align_covariates(s, w, madrid_calendar)
        for hr in range(4):
            block = t.temperature[hr * 4 : (hr + 1) * 4]
            assert np.all(block == block[0])
            assert block[0] == w.temperature[hr]

    def test_holiday_flag_on_civil_date(self):
        cal = HolidayCalendar(frozenset({date(2021, 1, 1)}))
        start = datetime(2020, 12, 31, 12, 0, tzinfo=UTC)
        s = make_series(np.ones(48), start=start, cadence=HOUR)
        w = hourly_weather(start, 48)
        t = align_covariates(s, w, cal)
        # civil date in Europe/Madrid: 2020-12-31 23:00 UTC is already Jan 1 local
        flagged = t.timestamps[t.holiday == 1]
        assert np.datetime64("2020-12-31T23:00:00") in flagged
        assert np.datetime64("2021-01-01T12:00:00") in flagged
        assert np.datetime64("2020-12-31T12:00:00") not in flagged

    def test_gap_beyond_tolerance_raises(self, madrid_calendar):
        temp = np.full(48, 15.0)
        temp[10:16] = np.nan  # 6-hour gap > 3h tolerance
        w = WeatherSeries("z", T0, temp, np.full(48, 50.0))
        s = make_series(np.ones(48), start=T0, cadence=HOUR)
        with pytest.raises(CoverageError):
            align_covariates(s, w, madrid_calendar)

    def test_gap_within_tolerance_forward_fills(self, madrid_calendar):
        temp = np.full(48, 15.0)
        temp[10:12] = np.nan
        w = WeatherSeries("z", T0, temp, np.full(48, 50.0))
        s = make_series(np.ones(48), start=T0, cadence=HOUR)
        t = align_covariates(s, w, madrid_calendar)
        assert t.temperature[10] == 15.0 and t.temperature[11] == 15.0

    def test_socio_passed_through(self, madrid_calendar):
        s = make_series(np.ones(24), start=T0, cadence=HOUR)
        w = hourly_weather(T0, 24)
        socio = SocioEconomicRecord("z", 1000, 50.0, 0.2, 18000.0)
        t = align_covariates(s, w, madrid_calendar, socio=socio)
        assert t.socio["population"] == 1000


class TestOtherFiles:
    def test_holiday_file_round_trip(self, tmp_path):
        cal = HolidayCalendar(frozenset({date(2021, 1, 1), date(2021, 5, 1)}), region="ES")
        p = tmp_path / "holidays.txt"
        write_holiday_file(cal, p)
        text = p.read_text()
        p.write_text("# national holidays\n" + text)
        cal2 = read_holiday_file(p, region="ES")
        assert cal2.dates == cal.dates

    def test_weather_round_trip(self, tmp_path):
        w = hourly_weather(T0, 6)
        p = tmp_path / "w.csv"
        write_weather_csv(w, p)
        w2 = ingest_weather_csv(p, zone_id="z")
        np.testing.assert_array_equal(w.temperature, w2.temperature)
        np.testing.assert_array_equal(w.humidity, w2.humidity)

    def test_socio_round_trip(self, tmp_path):
        recs = {"z1": SocioEconomicRecord("z1", 5000, 120.0, -0.3, 15000.0)}
        p = tmp_path / "socio.csv"
        write_socio_csv(recs, p)
        got = ingest_socio_csv(p)
        assert got["z1"] == recs["z1"]

    def test_humidity_bounds_enforced(self):
        with pytest.raises(DataError):
            WeatherSeries("z", T0, np.array([10.0]), np.array([140.0]))

    def test_socio_positivity(self):
        with pytest.raises(DataError):
            SocioEconomicRecord("z", 0, 10.0, 0.0, 1.0)
