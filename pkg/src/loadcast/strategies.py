"""Consumer-type-specific forecasting strategies.

Fusion pairs two specialist tree ensembles, one fit only on holiday rows
and one only on working-day rows, routed per timestamp by a calendar flag
that is known in advance. Hybrid feeds a statistical baseline prediction
into the tree ensemble as an extra covariate to reinforce its memory of
recent consumption. Location-level forecasts are element-wise sums of the
member consumers' forecasts.

Defaults per consumer type: industrial and commercial use fusion
(industrial counts weekends as holidays because of its bimodal
weekday/weekend behavior; commercial keeps Saturdays as working days),
residential uses hybrid.
"""

from __future__ import annotations

from dataclasses import dataclass
from datetime import datetime, timedelta, timezone
from typing import Mapping, Sequence
from zoneinfo import ZoneInfo

import numpy as np

from .classifier import ConsumerType
from .data import DEFAULT_TZ, AlignedTable, HolidayCalendar, LoadSeries
from .errors import AlignmentError, CalendarError, ConfigError, PartitionError
from .features import FeatureDescriptor, FeatureMatrix, FeatureSpec, build_matrix
from .models.baselines import BaselineParams, baseline_series
from .models.ensemble import GBDTParams, TreeEnsembleModel, fit_ensemble, predict_ensemble

PUBLIC_HOLIDAYS = "ph"
PUBLIC_PLUS_WEEKENDS = "ph+we"
_DEFINITIONS = (PUBLIC_HOLIDAYS, PUBLIC_PLUS_WEEKENDS)

BASELINE_COLUMN = "baseline"


def default_strategy(ctype: ConsumerType) -> str:
    return "hybrid" if ctype is ConsumerType.RESIDENTIAL else "fusion"


def default_holiday_definition(ctype: ConsumerType) -> str:
    return PUBLIC_PLUS_WEEKENDS if ctype is ConsumerType.INDUSTRIAL else PUBLIC_HOLIDAYS


def routing_flags(
    timestamps: np.ndarray,
    cal: HolidayCalendar,
    definition: str,
    tz: str = DEFAULT_TZ,
) -> np.ndarray:
    """Holiday flag per datetime64 timestamp under a routing definition.

    Raises when a timestamp's civil year is outside the calendar's span;
    the flag would otherwise silently default to 'working day'.
    """
    if definition not in _DEFINITIONS:
        raise ConfigError(f"holiday definition must be one of {_DEFINITIONS}, got {definition!r}")
    if not cal.dates:
        raise CalendarError("holiday calendar is empty")
    years = {d.year for d in cal.dates}
    lo, hi = min(years), max(years)
    zone = ZoneInfo(tz)
    flags = np.zeros(len(timestamps), dtype=bool)
    cache: dict[object, bool] = {}
    for i, ts in enumerate(timestamps):
        py = ts.astype("datetime64[s]").item().replace(tzinfo=timezone.utc)
        local = py.astimezone(zone)
        d = local.date()
        got = cache.get(d)
        if got is None:
            if not lo <= d.year <= hi:
                raise CalendarError(
                    f"timestamp {ts} falls in {d.year}, outside calendar coverage {lo}..{hi}"
                )
            got = d in cal.dates or (definition == PUBLIC_PLUS_WEEKENDS and d.weekday() >= 5)
            cache[d] = got
        flags[i] = got
    return flags


@dataclass(frozen=True)
class FusionModel:
    holiday_model: TreeEnsembleModel
    workday_model: TreeEnsembleModel
    holiday_definition: str
    calendar: HolidayCalendar
    tz: str = DEFAULT_TZ

    def __post_init__(self):
        if self.holiday_model.feature_names != self.workday_model.feature_names:
            raise ConfigError("fusion submodels must share one feature schema")

    @property
    def feature_names(self) -> tuple:
        return self.holiday_model.feature_names


def fit_fusion(
    matrix: FeatureMatrix,
    params: GBDTParams,
    cal: HolidayCalendar,
    holiday_definition: str,
    tz: str = DEFAULT_TZ,
    mode: str = "boosted",
    min_partition_rows: int = 100,
) -> FusionModel:
    """Fit holiday and working-day specialists on a partition of the rows."""
    flags = routing_flags(matrix.timestamps, cal, holiday_definition, tz)
    n_holiday = int(flags.sum())
    n_workday = len(flags) - n_holiday
    if n_holiday < min_partition_rows or n_workday < min_partition_rows:
        other = PUBLIC_HOLIDAYS if holiday_definition == PUBLIC_PLUS_WEEKENDS else PUBLIC_PLUS_WEEKENDS
        raise PartitionError(
            f"partition too small under {holiday_definition!r} "
            f"(holiday rows: {n_holiday}, workday rows: {n_workday}, floor {min_partition_rows}); "
            f"consider holiday definition {other!r}"
        )
    holiday_model = fit_ensemble(params, mode, matrix.subset(flags))
    workday_model = fit_ensemble(params, mode, matrix.subset(~flags))
    return FusionModel(holiday_model, workday_model, holiday_definition, cal, tz)


def predict_fusion(model: FusionModel, matrix: FeatureMatrix) -> np.ndarray:
    """Route every row to exactly one specialist; outputs stitch row-wise."""
    flags = routing_flags(matrix.timestamps, model.calendar, model.holiday_definition, model.tz)
    out = np.empty(len(matrix))
    if flags.any():
        out[flags] = predict_ensemble(model.holiday_model, matrix.X[flags], matrix.columns)
    if (~flags).any():
        out[~flags] = predict_ensemble(model.workday_model, matrix.X[~flags], matrix.columns)
    return out


@dataclass(frozen=True)
class HybridModel:
    core: TreeEnsembleModel
    baseline: BaselineParams
    spec: FeatureSpec  # includes the baseline covariate descriptor

    def __post_init__(self):
        if BASELINE_COLUMN not in self.core.feature_names:
            raise ConfigError("hybrid core model lacks the baseline covariate column")

    def spec_without_baseline(self) -> FeatureSpec:
        return FeatureSpec(tuple(d for d in self.spec if d.kind != "baseline-covariate"))


def hybrid_spec(spec: FeatureSpec) -> FeatureSpec:
    return spec.with_feature(
        FeatureDescriptor(BASELINE_COLUMN, "baseline-covariate", "numeric-raw")
    )


def _table_series(table: AlignedTable) -> LoadSeries:
    return LoadSeries(
        consumer_id=table.consumer_id,
        start=table.start,
        cadence=table.cadence,
        values=np.where(table.missing, np.nan, table.target),
        missing=table.missing.copy(),
    )


def hybrid_matrix(
    table: AlignedTable,
    spec: FeatureSpec,
    horizon: int,
    baseline: BaselineParams,
) -> FeatureMatrix:
    """Build the feature matrix with the baseline prediction as a column."""
    col = baseline_series(baseline, _table_series(table))
    return build_matrix(table, hybrid_spec(spec), horizon, extra_columns={BASELINE_COLUMN: col})


def fit_hybrid(
    table: AlignedTable,
    spec: FeatureSpec,
    horizon: int,
    params: GBDTParams,
    baseline: BaselineParams,
    mode: str = "boosted",
    train_until: datetime | np.datetime64 | None = None,
) -> HybridModel:
    """Fit the core ensemble on rows carrying the recomputed baseline column."""
    matrix = hybrid_matrix(table, spec, horizon, baseline)
    if train_until is not None:
        matrix = matrix.subset(matrix.between(None, train_until))
    core = fit_ensemble(params, mode, matrix)
    return HybridModel(core, baseline, hybrid_spec(spec))


def predict_hybrid(
    model: HybridModel, table: AlignedTable, horizon: int
) -> tuple[FeatureMatrix, np.ndarray]:
    """Recompute the baseline from history, then query the core per row.

    Returns (matrix, predictions) so the caller can align rows by timestamp.
    """
    matrix = hybrid_matrix(table, model.spec_without_baseline(), horizon, model.baseline)
    return matrix, predict_ensemble(model.core, matrix)


# ---------------------------------------------------------------------------
# Forecaster adapters for the rolling harness


class MatrixForecaster:
    """Adapts a fitted model to the harness contract: one kW per table row.

    The adapter owns the full covariate table (history included) so lag and
    baseline columns reach back before the evaluation span; rows whose
    features cannot be built yield NaN and their windows are skipped.
    """

    def __init__(
        self,
        model: TreeEnsembleModel | FusionModel | HybridModel,
        spec: FeatureSpec,
        horizon: int,
        full_table: AlignedTable,
    ):
        self.model = model
        self.horizon = horizon
        if isinstance(model, HybridModel):
            self.matrix = hybrid_matrix(full_table, spec, horizon, model.baseline)
        else:
            self.matrix = build_matrix(full_table, spec, horizon)

    def _predict_rows(self, matrix: FeatureMatrix) -> np.ndarray:
        if isinstance(self.model, FusionModel):
            return predict_fusion(self.model, matrix)
        if isinstance(self.model, HybridModel):
            return predict_ensemble(self.model.core, matrix)
        return predict_ensemble(self.model, matrix)

    def __call__(self, test_table: AlignedTable) -> np.ndarray:
        t0 = test_table.timestamps[0]
        t1 = test_table.timestamps[-1]
        mask = (self.matrix.timestamps >= t0) & (self.matrix.timestamps <= t1)
        sub = self.matrix.subset(mask)
        out = np.full(len(test_table), np.nan)
        if len(sub) == 0:
            return out
        preds = self._predict_rows(sub)
        step = np.timedelta64(int(test_table.cadence.total_seconds()), "s")
        pos = ((sub.timestamps - t0) / step).astype(int)
        out[pos] = preds
        return out


class BaselineForecaster:
    """Harness adapter for the persistence/statistical baselines."""

    def __init__(self, params: BaselineParams, full_series: LoadSeries):
        self.params = params
        self.series = full_series

    def __call__(self, test_table: AlignedTable) -> np.ndarray:
        i0 = self.series.index_of(test_table.start)
        return baseline_series(self.params, self.series, i0, i0 + len(test_table))


# ---------------------------------------------------------------------------
# Location aggregation


@dataclass(frozen=True)
class ForecastSeries:
    """A per-consumer (or per-location) forecast on a uniform grid."""

    consumer_id: str
    location: str
    start: datetime
    cadence: timedelta
    values: np.ndarray


def aggregate_forecasts(
    forecasts: Sequence[ForecastSeries],
    grouping: Mapping[str, str] | None = None,
) -> dict[str, ForecastSeries]:
    """Element-wise kW sum per location.

    ``grouping`` optionally remaps consumer ids to locations, otherwise the
    series' own location tags group them. Series at one location must share
    start, cadence and length.
    """
    if not forecasts:
        return {}
    groups: dict[str, list[ForecastSeries]] = {}
    for fc in forecasts:
        loc = grouping.get(fc.consumer_id, fc.location) if grouping else fc.location
        groups.setdefault(loc, []).append(fc)
    out: dict[str, ForecastSeries] = {}
    for loc in sorted(groups):
        members = groups[loc]
        first = members[0]
        for m in members[1:]:
            if (m.start, m.cadence, len(m.values)) != (first.start, first.cadence, len(first.values)):
                raise AlignmentError(
                    f"forecasts for location {loc!r} are misaligned "
                    f"({m.consumer_id!r} vs {first.consumer_id!r})"
                )
        total = np.sum([m.values for m in members], axis=0)
        out[loc] = ForecastSeries(
            consumer_id=loc, location=loc, start=first.start, cadence=first.cadence, values=total
        )
    return out
