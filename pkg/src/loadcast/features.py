"""Feature-matrix construction, ablation-based selection, permutation importance.

Calendar and holiday covariates are categorically coded for tree models
(one-hot stays available for other model families and is exercised in
tests). Weather is standardized to [-1, 1] on its training range. Lag
features must sit at or beyond the forecast horizon so no row can see the
future.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Callable, Sequence

import numpy as np

from .data import AlignedTable
from .errors import (
    ConfigError,
    InsufficientDataError,
    StandardizationError,
)
from .models.ensemble import fit_ensemble, predict_ensemble

KINDS = (
    "calendar-month",
    "calendar-weekday",
    "calendar-hour",
    "holiday-flag",
    "weather-temp",
    "weather-humidity",
    "socio-static",
    "target-lag",
    "baseline-covariate",
)
ENCODINGS = ("categorical-code", "one-hot", "numeric-standardized", "numeric-raw")

_CATEGORY_COUNTS = {"calendar-month": 12, "calendar-weekday": 7, "calendar-hour": 24}


@dataclass(frozen=True)
class FeatureDescriptor:
    name: str
    kind: str
    encoding: str = "numeric-raw"
    lag: int | None = None  # steps; target-lag only
    bounds: tuple[float, float] | None = None  # numeric-standardized only

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigError(f"unknown feature kind {self.kind!r}")
        if self.encoding not in ENCODINGS:
            raise ConfigError(f"unknown encoding {self.encoding!r}")
        if self.kind == "target-lag" and (self.lag is None or self.lag < 1):
            raise ConfigError(f"feature {self.name!r}: target-lag needs a positive lag")


@dataclass(frozen=True)
class FeatureSpec:
    features: tuple

    def __post_init__(self):
        names = [f.name for f in self.features]
        if len(names) != len(set(names)):
            raise ConfigError("feature names must be unique")

    def __iter__(self):
        return iter(self.features)

    def __len__(self):
        return len(self.features)

    def names(self) -> tuple:
        return tuple(f.name for f in self.features)

    def with_feature(self, descriptor: FeatureDescriptor) -> "FeatureSpec":
        return FeatureSpec(self.features + (descriptor,))

    def min_lag(self) -> int | None:
        lags = [f.lag for f in self.features if f.kind == "target-lag"]
        return min(lags) if lags else None


def day_ahead_spec(
    cadence_steps_per_hour: int = 1,
    include_socio: bool = False,
    lags_hours: Sequence[int] = (24, 25, 48, 168),
) -> FeatureSpec:
    """Default day-ahead features: calendar, holiday, weather, lags >= 24 h."""
    feats = [
        FeatureDescriptor("month", "calendar-month", "categorical-code"),
        FeatureDescriptor("weekday", "calendar-weekday", "categorical-code"),
        FeatureDescriptor("hour", "calendar-hour", "categorical-code"),
        FeatureDescriptor("holiday", "holiday-flag", "categorical-code"),
        FeatureDescriptor("temp", "weather-temp", "numeric-standardized"),
        FeatureDescriptor("humidity", "weather-humidity", "numeric-standardized"),
    ]
    for h in lags_hours:
        feats.append(
            FeatureDescriptor(f"lag_{h}h", "target-lag", "numeric-raw", lag=h * cadence_steps_per_hour)
        )
    if include_socio:
        for name in ("population", "density", "tsi", "gdhi"):
            feats.append(FeatureDescriptor(name, "socio-static", "numeric-raw"))
    return FeatureSpec(tuple(feats))


def fifteen_min_spec(
    include_socio: bool = False,
    lags_steps: Sequence[int] = (1, 2, 3, 4, 96, 672),
) -> FeatureSpec:
    """Default 15-minute features; lags in quarter-hour steps."""
    feats = [
        FeatureDescriptor("month", "calendar-month", "categorical-code"),
        FeatureDescriptor("weekday", "calendar-weekday", "categorical-code"),
        FeatureDescriptor("hour", "calendar-hour", "categorical-code"),
        FeatureDescriptor("holiday", "holiday-flag", "categorical-code"),
        FeatureDescriptor("temp", "weather-temp", "numeric-standardized"),
        FeatureDescriptor("humidity", "weather-humidity", "numeric-standardized"),
    ]
    for k in lags_steps:
        feats.append(FeatureDescriptor(f"lag_{k}", "target-lag", "numeric-raw", lag=int(k)))
    if include_socio:
        for name in ("population", "density", "tsi", "gdhi"):
            feats.append(FeatureDescriptor(name, "socio-static", "numeric-raw"))
    return FeatureSpec(tuple(feats))


def standardize_weather(train_range: tuple[float, float], values: np.ndarray) -> np.ndarray:
    """Affine map sending the training min to -1 and max to +1.

    Values outside the training range extrapolate linearly and may exceed
    the [-1, 1] band.
    """
    lo, hi = train_range
    if not hi > lo:
        raise StandardizationError(f"degenerate training range [{lo}, {hi}]")
    return 2.0 * (np.asarray(values, dtype=float) - lo) / (hi - lo) - 1.0


def fit_weather_bounds(table: AlignedTable, train_rows: int) -> dict[str, tuple[float, float]]:
    """Min/max of temperature and humidity over the first ``train_rows`` rows."""
    if train_rows < 1:
        raise ConfigError("need at least one training row to fit weather bounds")
    t = table.temperature[:train_rows]
    h = table.humidity[:train_rows]
    return {
        "weather-temp": (float(np.nanmin(t)), float(np.nanmax(t))),
        "weather-humidity": (float(np.nanmin(h)), float(np.nanmax(h))),
    }


@dataclass(frozen=True)
class FeatureMatrix:
    """Dense covariate rows aligned to target timestamps."""

    timestamps: np.ndarray  # datetime64[s]
    columns: tuple
    X: np.ndarray
    y: np.ndarray
    categorical: tuple
    horizon: int

    def __post_init__(self):
        if self.X.shape != (len(self.timestamps), len(self.columns)):
            raise ConfigError("matrix shape does not match columns/timestamps")

    def __len__(self):
        return len(self.y)

    def subset(self, mask: np.ndarray) -> "FeatureMatrix":
        return FeatureMatrix(
            timestamps=self.timestamps[mask],
            columns=self.columns,
            X=self.X[mask],
            y=self.y[mask],
            categorical=self.categorical,
            horizon=self.horizon,
        )

    def between(self, t0=None, t1=None) -> np.ndarray:
        """Boolean row mask for timestamps in [t0, t1)."""
        mask = np.ones(len(self), dtype=bool)
        if t0 is not None:
            mask &= self.timestamps >= np.datetime64(t0)
        if t1 is not None:
            mask &= self.timestamps < np.datetime64(t1)
        return mask

    def column(self, name: str) -> np.ndarray:
        return self.X[:, self.columns.index(name)]


_ONE_HOT_BASE = {"calendar-month": 1, "calendar-weekday": 0, "calendar-hour": 0}


def _raw_column(table: AlignedTable, d: FeatureDescriptor, extra: dict) -> np.ndarray:
    if d.kind == "calendar-month":
        return table.month.astype(float)
    if d.kind == "calendar-weekday":
        return table.weekday.astype(float)
    if d.kind == "calendar-hour":
        return table.hour.astype(float)
    if d.kind == "holiday-flag":
        return table.holiday.astype(float)
    if d.kind == "weather-temp":
        return table.temperature.astype(float)
    if d.kind == "weather-humidity":
        return table.humidity.astype(float)
    if d.kind == "socio-static":
        if table.socio is None or d.name not in table.socio:
            raise ConfigError(f"socio-economic field {d.name!r} unavailable for this consumer")
        return np.full(len(table), float(table.socio[d.name]))
    if d.kind == "target-lag":
        out = np.full(len(table), np.nan)
        k = d.lag
        if k < len(table):
            out[k:] = table.target[:-k]
        return out
    if d.kind == "baseline-covariate":
        if d.name not in extra:
            raise ConfigError(f"baseline column {d.name!r} was not supplied")
        col = np.asarray(extra[d.name], dtype=float)
        if len(col) != len(table):
            raise ConfigError(f"baseline column {d.name!r} has wrong length")
        return col
    raise ConfigError(f"unhandled feature kind {d.kind!r}")


def build_matrix(
    table: AlignedTable,
    spec: FeatureSpec,
    horizon: int,
    extra_columns: dict | None = None,
) -> FeatureMatrix:
    """Expand a feature spec over an aligned table.

    Rows missing any lag, covariate or the target are dropped. Lag features
    shorter than the horizon are rejected (they would leak future values
    into a day-ahead row).
    """
    if horizon < 1:
        raise ConfigError("horizon must be >= 1 step")
    extra = extra_columns or {}
    names: list[str] = []
    cols: list[np.ndarray] = []
    cats: list[bool] = []
    for d in spec:
        if d.kind == "target-lag" and d.lag < horizon:
            raise ConfigError(
                f"lag feature {d.name!r} at {d.lag} steps is inside the {horizon}-step horizon"
            )
        raw = _raw_column(table, d, extra)
        if d.encoding == "one-hot":
            count = _CATEGORY_COUNTS.get(d.kind)
            if count is None:
                raise ConfigError(f"one-hot encoding unsupported for kind {d.kind!r}")
            base = _ONE_HOT_BASE[d.kind]
            for v in range(count):
                names.append(f"{d.name}={v + base}")
                cols.append((raw == v + base).astype(float))
                cats.append(False)
            continue
        if d.encoding == "numeric-standardized":
            if d.bounds is None:
                raise ConfigError(f"feature {d.name!r} needs fitted standardization bounds")
            raw = standardize_weather(d.bounds, raw)
        names.append(d.name)
        cols.append(raw)
        cats.append(d.encoding == "categorical-code")

    X = np.column_stack(cols) if cols else np.zeros((len(table), 0))
    y = table.target
    keep = ~table.missing & np.isfinite(y)
    if X.shape[1]:
        keep &= np.all(np.isfinite(X), axis=1)
    if not keep.any():
        raise InsufficientDataError(
            "no usable rows: every row lacks a lag, covariate or target value"
        )
    return FeatureMatrix(
        timestamps=table.timestamps[keep],
        columns=tuple(names),
        X=X[keep],
        y=y[keep],
        categorical=tuple(cats),
        horizon=horizon,
    )


def apply_bounds(spec: FeatureSpec, bounds: dict[str, tuple[float, float]]) -> FeatureSpec:
    """Attach fitted standardization bounds to matching descriptors."""
    feats = []
    for d in spec:
        if d.encoding == "numeric-standardized" and d.kind in bounds:
            feats.append(replace(d, bounds=bounds[d.kind]))
        else:
            feats.append(d)
    return FeatureSpec(tuple(feats))


def spec_to_doc(spec: FeatureSpec) -> list:
    """JSON-friendly form of a feature spec, fitted bounds included."""
    out = []
    for d in spec:
        entry = {"name": d.name, "kind": d.kind, "encoding": d.encoding}
        if d.lag is not None:
            entry["lag"] = int(d.lag)
        if d.bounds is not None:
            entry["bounds"] = [float(d.bounds[0]), float(d.bounds[1])]
        out.append(entry)
    return out


def spec_from_doc(doc: list) -> FeatureSpec:
    feats = []
    for entry in doc:
        feats.append(
            FeatureDescriptor(
                name=entry["name"],
                kind=entry["kind"],
                encoding=entry.get("encoding", "numeric-raw"),
                lag=entry.get("lag"),
                bounds=tuple(entry["bounds"]) if entry.get("bounds") else None,
            )
        )
    return FeatureSpec(tuple(feats))


# ---------------------------------------------------------------------------
# Ablation-based feature selection


@dataclass(frozen=True)
class AblationProtocol:
    """How ablation deltas are measured.

    ``model_configs`` must register at least two tree-model configurations;
    the report keeps one delta per (feature, model, metric) cell. A feature
    is selected when its mean relative error change across cells is below
    ``-epsilon``.
    """

    horizon: int
    train_until: np.datetime64
    validate_until: np.datetime64
    model_configs: tuple  # ((name, GBDTParams, mode), ...)
    epsilon: float = 0.005

    def __post_init__(self):
        if len(self.model_configs) < 2:
            raise ConfigError("ablation needs at least two registered model configurations")


@dataclass(frozen=True)
class AblationCell:
    feature: str
    model: str
    metric: str
    error_with: float
    error_without: float
    valid: bool = True

    @property
    def delta(self) -> float:
        return self.error_with - self.error_without

    @property
    def relative_delta(self) -> float:
        if self.error_without == 0:
            return 0.0 if self.error_with == 0 else np.inf
        return self.delta / self.error_without


@dataclass(frozen=True)
class FeatureAblationReport:
    cells: tuple
    selected: tuple  # names of kept candidates
    base_names: tuple
    notes: str = ""

    def cells_for(self, feature: str) -> list[AblationCell]:
        return [c for c in self.cells if c.feature == feature]

    def to_csv(self) -> str:
        lines = ["feature,model,metric,error_with,error_without,delta,valid"]
        for c in self.cells:
            lines.append(
                f"{c.feature},{c.model},{c.metric},{c.error_with:.6f},"
                f"{c.error_without:.6f},{c.delta:.6f},{int(c.valid)}"
            )
        return "\n".join(lines) + "\n"


def _val_errors(table, spec, protocol, extra):
    from .evaluation import mae, mape  # local import to avoid a cycle

    matrix = build_matrix(table, spec, protocol.horizon, extra_columns=extra)
    train = matrix.subset(matrix.between(None, protocol.train_until))
    val = matrix.subset(matrix.between(protocol.train_until, protocol.validate_until))
    if len(train) == 0 or len(val) == 0:
        raise InsufficientDataError("ablation split produced an empty train or validation set")
    out = {}
    for name, params, mode in protocol.model_configs:
        model = fit_ensemble(params, mode, train)
        pred = predict_ensemble(model, val)
        ok = val.y != 0
        out[(name, "MAPE")] = mape(val.y[ok], pred[ok]) if ok.any() else np.nan
        out[(name, "MAE")] = mae(val.y, pred)
    return out


def ablate_features(
    candidates: FeatureSpec,
    base: FeatureSpec,
    table: AlignedTable,
    protocol: AblationProtocol,
    extra_columns: dict | None = None,
) -> FeatureAblationReport:
    """Measure each candidate's validation-error change over the base set.

    Candidates are evaluated one at a time against the base alone; a
    candidate joins the selected set only when it reduces error beyond the
    protocol's epsilon on average. Failed cells are marked invalid and the
    decision falls back to the remaining cells.
    """
    notes = (
        "base set = lag features only; candidates evaluated one at a time; "
        f"selection: mean relative error delta < -{protocol.epsilon:g}"
    )
    if len(candidates) == 0:
        return FeatureAblationReport((), (), base.names(), notes=notes)

    base_errors = _val_errors(table, base, protocol, extra_columns)
    cells: list[AblationCell] = []
    selected: list[str] = []
    for d in candidates:
        feature_cells = []
        try:
            errors = _val_errors(table, base.with_feature(d), protocol, extra_columns)
            for (model, metric), e_with in sorted(errors.items()):
                feature_cells.append(
                    AblationCell(d.name, model, metric, float(e_with), float(base_errors[(model, metric)]))
                )
        except Exception:
            for name, _, _ in protocol.model_configs:
                for metric in ("MAE", "MAPE"):
                    feature_cells.append(
                        AblationCell(d.name, name, metric, np.nan, np.nan, valid=False)
                    )
        cells.extend(feature_cells)
        rel = [c.relative_delta for c in feature_cells if c.valid and np.isfinite(c.relative_delta)]
        if rel and float(np.mean(rel)) < -protocol.epsilon:
            selected.append(d.name)
    return FeatureAblationReport(tuple(cells), tuple(selected), base.names(), notes=notes)


# ---------------------------------------------------------------------------
# Permutation importance


def permutation_importance(
    model,
    matrix: FeatureMatrix,
    metric: Callable[[np.ndarray, np.ndarray], float],
    repeats: int = 5,
    seed: int = 0,
) -> dict[str, float]:
    """Mean metric degradation over within-column shuffles, per feature.

    A model-agnostic importance: shuffling a column the model never uses
    changes nothing, so its importance is exactly zero.
    """
    if repeats < 1:
        raise ConfigError("repeats must be >= 1")
    if len(matrix) < 2:
        raise InsufficientDataError("permutation importance needs at least 2 rows")
    rng = np.random.default_rng(seed)
    baseline = metric(matrix.y, predict_ensemble(model, matrix))
    out: dict[str, float] = {}
    for j, name in enumerate(matrix.columns):
        degradation = 0.0
        for _ in range(repeats):
            Xp = matrix.X.copy()
            Xp[:, j] = Xp[rng.permutation(len(Xp)), j]
            degradation += metric(matrix.y, predict_ensemble(model, Xp)) - baseline
        out[name] = float(degradation / repeats)
    return out
