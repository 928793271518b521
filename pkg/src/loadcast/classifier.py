"""Rule-based consumer-type classification from load-profile statistics.

Statistics are computed on the min-max normalized series so the absolute
0.1 spread threshold is meaningful regardless of the consumer's scale, and
classification is invariant under positive rescaling of the raw load.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from datetime import timedelta
from typing import Mapping, Sequence

import numpy as np

from .data import DEFAULT_TZ, ConsumerRecord, HolidayCalendar, LoadSeries, civil_fields, holiday_mask
from .errors import StatisticError

MIN_SPAN = timedelta(weeks=4)


class ConsumerType(enum.Enum):
    INDUSTRIAL = "industrial"
    COMMERCIAL = "commercial"
    RESIDENTIAL = "residential"

    def __str__(self) -> str:  # pragma: no cover - cosmetic
        return self.value


TYPE_ORDER = (ConsumerType.INDUSTRIAL, ConsumerType.COMMERCIAL, ConsumerType.RESIDENTIAL)


@dataclass(frozen=True)
class ProfileStats:
    """Aggregate statistics of a normalized load profile.

    ``c_h``: mean on public-holiday timestamps. ``c_w``: mean on working
    days (Mon-Fri, non-holiday). ``c_sat``/``c_sun``: Saturday and Sunday
    means. ``hourly_means``: 24-vector of per-hour-of-day means, with
    ``hourly_std`` its standard deviation.
    """

    c_h: float
    c_w: float
    c_sat: float
    c_sun: float
    hourly_means: np.ndarray
    hourly_std: float

    def as_dict(self) -> dict[str, float]:
        return {
            "c_h": self.c_h,
            "c_w": self.c_w,
            "c_sat": self.c_sat,
            "c_sun": self.c_sun,
            "hourly_std": self.hourly_std,
        }


def normalize_series(values: np.ndarray) -> np.ndarray:
    """Min-max scale to [0, 1]; a constant series maps to all zeros."""
    lo = np.nanmin(values)
    hi = np.nanmax(values)
    if hi > lo:
        return (values - lo) / (hi - lo)
    return np.zeros_like(values)


def profile_stats(series: LoadSeries, cal: HolidayCalendar, tz: str = DEFAULT_TZ) -> ProfileStats:
    """Compute the classification statistics for one series.

    Requires at least 4 full weeks of data and at least one public holiday
    inside the span. Holiday timestamps here are public-holiday dates only;
    weekends are captured by the Saturday/Sunday means.
    """
    n = len(series)
    if n * series.cadence < MIN_SPAN:
        raise StatisticError(
            f"series {series.consumer_id!r} spans {n * series.cadence}, "
            f"need at least {MIN_SPAN} for profile statistics"
        )
    _, _, weekday, hour, _ = civil_fields(series.start, series.cadence, n, tz)
    is_holiday = holiday_mask(series.start, series.cadence, n, cal, tz, include_weekends=False)
    if not is_holiday.any():
        raise StatisticError(
            f"series {series.consumer_id!r} contains no public holiday; "
            "use a longer window"
        )

    norm = normalize_series(series.values)
    ok = ~series.missing

    def mean_over(mask: np.ndarray) -> float:
        sel = mask & ok
        if not sel.any():
            raise StatisticError(f"no usable samples for a statistic of {series.consumer_id!r}")
        return float(norm[sel].mean())

    working = (weekday < 5) & ~is_holiday
    hourly = np.array([mean_over(hour == h) for h in range(24)])
    return ProfileStats(
        c_h=mean_over(is_holiday),
        c_w=mean_over(working),
        c_sat=mean_over(weekday == 5),
        c_sun=mean_over(weekday == 6),
        hourly_means=hourly,
        hourly_std=float(hourly.std()),
    )


def classify_with_rule(stats: ProfileStats) -> tuple[ConsumerType, str]:
    """Apply the fixed rule cascade; returns the type and which rule fired.

    Rule 1 (industrial): holiday mean below half the working-day mean and
    Saturday mean below twice the Sunday mean. Rule 2 (commercial): hourly
    spread above 0.1 with holiday mean below working-day mean, or Saturday
    mean above 1.5x the Sunday mean. Everything else is residential.
    """
    if stats.c_h < stats.c_w / 2 and stats.c_sat < 2 * stats.c_sun:
        return ConsumerType.INDUSTRIAL, "rule-1"
    if (stats.hourly_std > 0.1 and stats.c_h < stats.c_w) or stats.c_sat > 1.5 * stats.c_sun:
        return ConsumerType.COMMERCIAL, "rule-2"
    return ConsumerType.RESIDENTIAL, "fallback"


def classify(stats: ProfileStats) -> ConsumerType:
    return classify_with_rule(stats)[0]


@dataclass(frozen=True)
class ConfusionMatrix:
    """3x3 (truth, predicted) counts over classified subsets."""

    counts: np.ndarray  # indexed by TYPE_ORDER

    def __post_init__(self):
        counts = np.asarray(self.counts, dtype=np.int64)
        if counts.shape != (3, 3):
            raise ValueError("confusion matrix must be 3x3")
        object.__setattr__(self, "counts", counts)

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    @property
    def overall_accuracy(self) -> float:
        return float(np.trace(self.counts) / self.total) if self.total else float("nan")

    def per_class_accuracy(self) -> dict[ConsumerType, float]:
        out = {}
        for i, t in enumerate(TYPE_ORDER):
            row = self.counts[i].sum()
            out[t] = float(self.counts[i, i] / row) if row else float("nan")
        return out

    def to_csv(self) -> str:
        header = "truth\\predicted," + ",".join(t.value for t in TYPE_ORDER)
        lines = [header]
        for i, t in enumerate(TYPE_ORDER):
            lines.append(t.value + "," + ",".join(str(int(c)) for c in self.counts[i]))
        lines.append(f"overall_accuracy,{self.overall_accuracy:.6f},,")
        return "\n".join(lines) + "\n"


def split_series(series: LoadSeries, parts: int) -> list[LoadSeries]:
    """Split into ``parts`` contiguous near-equal subsets (first ones longer)."""
    n = len(series)
    base, extra = divmod(n, parts)
    out = []
    i0 = 0
    for p in range(parts):
        i1 = i0 + base + (1 if p < extra else 0)
        out.append(series.slice(i0, i1))
        i0 = i1
    return out


def evaluate_classifier(
    records: Sequence[ConsumerRecord],
    split_counts: Mapping[ConsumerType, int],
    cal: HolidayCalendar,
    tz: str = DEFAULT_TZ,
) -> ConfusionMatrix:
    """Classify contiguous subsets of labeled records and aggregate results.

    Each record's series is split into ``split_counts[declared_type]``
    subsets, every subset classified independently. Subsets shorter than
    4 weeks raise with the offending consumer id.
    """
    counts = np.zeros((3, 3), dtype=np.int64)
    index = {t: i for i, t in enumerate(TYPE_ORDER)}
    for record in sorted(records, key=lambda r: r.consumer_id):
        if record.declared_type is None:
            raise StatisticError(f"record {record.consumer_id!r} has no declared type")
        parts = int(split_counts.get(record.declared_type, 1))
        if parts < 1:
            raise StatisticError("split counts must be >= 1 per class")
        for subset in split_series(record.load, parts):
            try:
                predicted = classify(profile_stats(subset, cal, tz))
            except StatisticError as exc:
                raise StatisticError(f"consumer {record.consumer_id!r}: {exc}") from exc
            counts[index[record.declared_type], index[predicted]] += 1
    return ConfusionMatrix(counts)
