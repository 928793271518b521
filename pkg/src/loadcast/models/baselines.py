"""Persistence and statistical baselines.

The residential day-ahead baseline averages the same hour one day and one
week back; the 15-minute baseline blends the last observation with the
mean of the same time-of-day over the last four days and the same
time-and-weekday over the last four weeks (weights 0.6 / 0.2 / 0.2).
Day and week lags are taken in whole days/weeks at the series cadence.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from datetime import datetime, timedelta

import numpy as np

from ..data import LoadSeries
from ..errors import ConfigError, HorizonError

DAY = timedelta(days=1)
WEEK = timedelta(weeks=1)


class BaselineKind(enum.Enum):
    PERSIST_LAST_STEP = "persist-last-step"
    PERSIST_PREVIOUS_DAY = "persist-previous-day"
    RESIDENTIAL_DAY = "residential-day"
    RESIDENTIAL_15MIN = "residential-15min"


@dataclass(frozen=True)
class BaselineParams:
    kind: BaselineKind
    w_last: float = 0.6
    w_day: float = 0.2
    w_week: float = 0.2
    n_day_lags: int = 4
    n_week_lags: int = 4

    def __post_init__(self):
        total = self.w_last + self.w_day + self.w_week
        if abs(total - 1.0) > 1e-12:
            raise ConfigError(f"baseline weights must sum to 1, got {total}")
        if self.n_day_lags < 1 or self.n_week_lags < 1:
            raise ConfigError("need at least one day lag and one week lag")

    def required_history(self, cadence: timedelta) -> int:
        """Steps of history needed before the first predictable timestamp."""
        steps = _steps(cadence)
        if self.kind is BaselineKind.PERSIST_LAST_STEP:
            return 1
        if self.kind is BaselineKind.PERSIST_PREVIOUS_DAY:
            return steps[DAY]
        if self.kind is BaselineKind.RESIDENTIAL_DAY:
            return steps[WEEK]
        return self.n_week_lags * steps[WEEK]


def _steps(cadence: timedelta) -> dict[timedelta, int]:
    return {DAY: int(DAY // cadence), WEEK: int(WEEK // cadence)}


def _lag_value(history: LoadSeries, idx: int, lag_steps: int, label: str) -> float:
    j = idx - lag_steps
    if j < 0:
        raise HorizonError(
            f"history starts {history.start}; lag {label} before target "
            f"{history.timestamp_at(idx)} is unavailable"
        )
    v = history.values[j]
    if np.isnan(v):
        raise HorizonError(f"lag {label} of target {history.timestamp_at(idx)} is missing")
    return float(v)


def _predict_at_index(params: BaselineParams, history: LoadSeries, idx: int) -> float:
    steps = _steps(history.cadence)
    kind = params.kind
    if kind is BaselineKind.PERSIST_LAST_STEP:
        return _lag_value(history, idx, 1, "1 step")
    if kind is BaselineKind.PERSIST_PREVIOUS_DAY:
        return _lag_value(history, idx, steps[DAY], "1 day")
    if kind is BaselineKind.RESIDENTIAL_DAY:
        day = _lag_value(history, idx, steps[DAY], "1 day")
        week = _lag_value(history, idx, steps[WEEK], "1 week")
        return 0.5 * (day + week)
    if kind is BaselineKind.RESIDENTIAL_15MIN:
        last = _lag_value(history, idx, 1, "1 step")
        days = [
            _lag_value(history, idx, d * steps[DAY], f"{d} days")
            for d in range(1, params.n_day_lags + 1)
        ]
        weeks = [
            _lag_value(history, idx, w * steps[WEEK], f"{w} weeks")
            for w in range(1, params.n_week_lags + 1)
        ]
        return (
            params.w_last * last
            + (params.w_day / params.n_day_lags) * sum(days)
            + (params.w_week / params.n_week_lags) * sum(weeks)
        )
    raise ConfigError(f"unknown baseline kind {kind}")


def predict_baseline(params: BaselineParams, history: LoadSeries, at: datetime) -> float:
    """Baseline forecast of the load at timestamp ``at`` (a grid point)."""
    return _predict_at_index(params, history, history.index_of(at))


def baseline_series(
    params: BaselineParams, history: LoadSeries, i0: int = 0, i1: int | None = None
) -> np.ndarray:
    """Vectorized baseline over grid indices [i0, i1); NaN where lags are short.

    Equivalent to calling predict_baseline per timestamp, but missing or
    out-of-range lags yield NaN instead of raising, which suits feature
    construction where such rows are dropped.
    """
    if i1 is None:
        i1 = len(history)
    steps = _steps(history.cadence)
    idx = np.arange(i0, i1)
    vals = history.values

    def lag(k: int) -> np.ndarray:
        j = idx - k
        out = np.full(len(idx), np.nan)
        ok = j >= 0
        out[ok] = vals[j[ok]]
        return out

    kind = params.kind
    if kind is BaselineKind.PERSIST_LAST_STEP:
        return lag(1)
    if kind is BaselineKind.PERSIST_PREVIOUS_DAY:
        return lag(steps[DAY])
    if kind is BaselineKind.RESIDENTIAL_DAY:
        return 0.5 * (lag(steps[DAY]) + lag(steps[WEEK]))
    if kind is BaselineKind.RESIDENTIAL_15MIN:
        days = sum(lag(d * steps[DAY]) for d in range(1, params.n_day_lags + 1))
        weeks = sum(lag(w * steps[WEEK]) for w in range(1, params.n_week_lags + 1))
        return (
            params.w_last * lag(1)
            + (params.w_day / params.n_day_lags) * days
            + (params.w_week / params.n_week_lags) * weeks
        )
    raise ConfigError(f"unknown baseline kind {kind}")
