"""End-to-end orchestration: classify, tune, train, evaluate, aggregate, report.

Every random choice derives from the single run seed via named sub-streams
(per-consumer seeds, tuner seeds), and artifacts are written in sorted
order with canonical JSON, so two runs of the same config are
byte-identical apart from nothing at all.
"""

from __future__ import annotations

import csv
import io
import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from datetime import timedelta
from pathlib import Path

import numpy as np

from .classifier import (
    ConsumerType,
    TYPE_ORDER,
    ConfusionMatrix,
    classify_with_rule,
    profile_stats,
)
from .data import (
    DEFAULT_TZ,
    HOUR,
    QUARTER,
    AlignedTable,
    ConsumerRecord,
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
from .errors import ConfigError, CoverageError, LoadcastError, ReportError
from .evaluation import (
    DAY_AHEAD,
    FIFTEEN_MIN,
    EvalReport,
    ThresholdPolicy,
    compare_reports,
    rmse,
    rolling_15min,
    rolling_day_ahead,
)
from .features import (
    FeatureSpec,
    apply_bounds,
    build_matrix,
    day_ahead_spec,
    fifteen_min_spec,
    fit_weather_bounds,
    spec_from_doc,
    spec_to_doc,
)
from .models.baselines import BaselineKind, BaselineParams
from .models.ensemble import GBDTParams, fit_ensemble, predict_ensemble
from .models.io import model_fingerprint, serialize_model
from .strategies import (
    BaselineForecaster,
    ForecastSeries,
    FusionModel,
    HybridModel,
    MatrixForecaster,
    aggregate_forecasts,
    default_holiday_definition,
    default_strategy,
    fit_fusion,
    fit_hybrid,
)
from .synthgen import generate_fleet
from .tuner import TPEConfig, default_gbdt_space, tune

TASKS = (DAY_AHEAD, FIFTEEN_MIN)
_BASELINE_KIND = {DAY_AHEAD: BaselineKind.PERSIST_PREVIOUS_DAY, FIFTEEN_MIN: BaselineKind.PERSIST_LAST_STEP}
_HYBRID_KIND = {DAY_AHEAD: BaselineKind.RESIDENTIAL_DAY, FIFTEEN_MIN: BaselineKind.RESIDENTIAL_15MIN}
_HORIZON = {DAY_AHEAD: 24, FIFTEEN_MIN: 1}


@dataclass(frozen=True)
class ConsumerOverride:
    strategy: str | None = None  # "single" | "fusion" | "hybrid"
    holiday_def: str | None = None  # "ph" | "ph+we"
    policy: dict | None = None  # per-consumer ThresholdPolicy field overrides


@dataclass(frozen=True)
class RunConfig:
    out_dir: Path
    seed: int = 0
    tz: str = DEFAULT_TZ
    tasks: tuple = TASKS
    split: tuple = (0.7, 0.15, 0.15)
    tuner_budget: int = 0
    compare_single: bool = True
    jobs: int = 1
    min_partition_rows: int = 100
    render_plots: bool = True
    policy: ThresholdPolicy = field(default_factory=ThresholdPolicy)
    gbdt: GBDTParams = field(default_factory=GBDTParams)
    overrides: dict = field(default_factory=dict)  # consumer_id -> ConsumerOverride
    # data source: synthetic fleet ...
    synth: dict | None = None  # {"industrial": n, "commercial": n, "residential": n, "span_weeks": w}
    # ... or files written by the synth subcommand / external tooling
    data_dir: Path | None = None

    def __post_init__(self):
        if abs(sum(self.split) - 1.0) > 1e-9:
            raise ConfigError(f"split fractions must sum to 1, got {self.split}")
        for t in self.tasks:
            if t not in TASKS:
                raise ConfigError(f"unknown task {t!r}")
        if self.synth is None and self.data_dir is None:
            raise ConfigError("config needs either a synth block or a data_dir")


def load_run_config(path: str | Path, **cli_overrides) -> RunConfig:
    """Read the JSON run configuration; CLI flags override file values."""
    raw = json.loads(Path(path).read_text())
    raw.update({k: v for k, v in cli_overrides.items() if v is not None})
    policy = ThresholdPolicy(**raw.get("policy", {}))
    gbdt = GBDTParams(**raw.get("gbdt", {}))
    overrides = {
        cid: ConsumerOverride(**spec) for cid, spec in raw.get("overrides", {}).items()
    }
    return RunConfig(
        out_dir=Path(raw["out_dir"]),
        seed=int(raw.get("seed", 0)),
        tz=raw.get("tz", DEFAULT_TZ),
        tasks=tuple(raw.get("tasks", TASKS)),
        split=tuple(raw.get("split", (0.7, 0.15, 0.15))),
        tuner_budget=int(raw.get("tuner_budget", 0)),
        compare_single=bool(raw.get("compare_single", True)),
        jobs=int(raw.get("jobs", 1)),
        min_partition_rows=int(raw.get("min_partition_rows", 100)),
        render_plots=bool(raw.get("render_plots", True)),
        policy=policy,
        gbdt=gbdt,
        overrides=overrides,
        synth=raw.get("synth"),
        data_dir=Path(raw["data_dir"]) if raw.get("data_dir") else None,
    )


# ---------------------------------------------------------------------------
# Data loading


@dataclass
class Dataset:
    records: list
    weather: dict
    calendar: HolidayCalendar
    socio: dict
    labels: dict  # consumer_id -> ConsumerType (ground truth when known)


def write_dataset(ds: Dataset, out: Path) -> None:
    """Write the corpus in the file schemas the run pipeline ingests."""
    out.mkdir(parents=True, exist_ok=True)
    (out / "load").mkdir(exist_ok=True)
    (out / "weather").mkdir(exist_ok=True)
    for r in sorted(ds.records, key=lambda r: r.consumer_id):
        write_load_csv(r.load, out / "load" / f"{r.consumer_id}.csv")
    for zone in sorted(ds.weather):
        write_weather_csv(ds.weather[zone], out / "weather" / f"{zone}.csv")
    write_holiday_file(ds.calendar, out / "holidays.txt")
    if ds.socio:
        write_socio_csv(ds.socio, out / "socio.csv")
    with (out / "zones.csv").open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["consumer_id", "zone_id"])
        for r in sorted(ds.records, key=lambda r: r.consumer_id):
            writer.writerow([r.consumer_id, r.zone_id])
    if ds.labels:
        with (out / "labels.csv").open("w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["consumer_id", "type"])
            for cid in sorted(ds.labels):
                writer.writerow([cid, ds.labels[cid].value])


def read_dataset(data_dir: Path, cadence: timedelta) -> Dataset:
    data_dir = Path(data_dir)
    zones: dict[str, str] = {}
    zones_file = data_dir / "zones.csv"
    if zones_file.exists():
        with zones_file.open(newline="") as fh:
            for row in csv.DictReader(fh):
                zones[row["consumer_id"]] = row["zone_id"]
    labels: dict[str, ConsumerType] = {}
    labels_file = data_dir / "labels.csv"
    if labels_file.exists():
        with labels_file.open(newline="") as fh:
            for row in csv.DictReader(fh):
                labels[row["consumer_id"]] = ConsumerType(row["type"])
    weather = {}
    for p in sorted((data_dir / "weather").glob("*.csv")):
        weather[p.stem] = ingest_weather_csv(p)
    if not weather:
        raise ConfigError(f"no weather CSVs found under {data_dir / 'weather'}")
    calendar = read_holiday_file(data_dir / "holidays.txt")
    socio = ingest_socio_csv(data_dir / "socio.csv") if (data_dir / "socio.csv").exists() else {}
    records = []
    for p in sorted((data_dir / "load").glob("*.csv")):
        cid = p.stem
        zone = zones.get(cid, next(iter(weather)))
        series = ingest_load_csv(p, cadence, consumer_id=cid)
        records.append(ConsumerRecord(cid, zone, labels.get(cid), series))
    if not records:
        raise ConfigError(f"no load CSVs found under {data_dir / 'load'}")
    return Dataset(records, weather, calendar, socio, labels)


def load_dataset(config: RunConfig) -> Dataset:
    cadence = QUARTER if FIFTEEN_MIN in config.tasks else HOUR
    if config.synth is not None:
        counts = {
            ConsumerType.INDUSTRIAL: int(config.synth.get("industrial", 0)),
            ConsumerType.COMMERCIAL: int(config.synth.get("commercial", 0)),
            ConsumerType.RESIDENTIAL: int(config.synth.get("residential", 0)),
        }
        counts = {t: n for t, n in counts.items() if n > 0}
        fleet = generate_fleet(
            counts,
            seed=config.seed,
            span_weeks=int(config.synth.get("span_weeks", 52)),
            cadence=cadence,
            tz=config.tz,
        )
        return Dataset(list(fleet.records), dict(fleet.weather), fleet.calendar,
                       dict(fleet.socio), fleet.labels())
    return read_dataset(config.data_dir, cadence)


# ---------------------------------------------------------------------------
# Per-consumer work


@dataclass
class ConsumerJob:
    record: ConsumerRecord
    weather: WeatherSeries
    calendar: HolidayCalendar
    socio: SocioEconomicRecord | None
    config: RunConfig
    seed: int


@dataclass
class TaskOutcome:
    task: str
    strategy: str
    tuned_params: GBDTParams
    reports: dict  # label -> EvalReport ("selected", "single", "baseline")
    forecast: ForecastSeries
    fingerprint: str
    models: dict  # label -> serialized JSON string


@dataclass
class ConsumerResult:
    consumer_id: str
    zone_id: str
    declared: ConsumerType | None
    classified: ConsumerType
    rule: str
    stats: dict
    outcomes: list
    error: str | None = None
    stage: str | None = None


def _split_points(n: int, split: tuple) -> tuple[int, int]:
    train_end = int(n * split[0])
    val_end = int(n * (split[0] + split[1]))
    return train_end, val_end


def _tune_params(matrix, train_until, val_until, base: GBDTParams, budget: int, seed: int) -> GBDTParams:
    train = matrix.subset(matrix.between(None, train_until))
    val = matrix.subset(matrix.between(train_until, val_until))
    if len(train) == 0 or len(val) == 0:
        raise ConfigError("tuning split is empty; reduce lags or extend the span")

    def objective(assignment: dict) -> float:
        params = replace(base, seed=base.seed, **assignment)
        model = fit_ensemble(params, "boosted", train)
        return rmse(val.y, predict_ensemble(model, val))

    result = tune(objective, default_gbdt_space(), TPEConfig(seed=seed), budget)
    return replace(base, seed=base.seed, **result.best.assignment)


def strategy_to_doc(model, spec: FeatureSpec, task: str, horizon_steps: int, tz: str) -> dict:
    """Self-contained model document: submodels plus the fitted feature spec."""
    doc = {
        "task": task,
        "horizon_steps": int(horizon_steps),
        "tz": tz,
        "spec": spec_to_doc(spec),
    }
    if isinstance(model, FusionModel):
        doc["strategy"] = "fusion"
        doc["holiday"] = json.loads(serialize_model(model.holiday_model))
        doc["workday"] = json.loads(serialize_model(model.workday_model))
        doc["holiday_definition"] = model.holiday_definition
    elif isinstance(model, HybridModel):
        doc["strategy"] = "hybrid"
        doc["core"] = json.loads(serialize_model(model.core))
        doc["baseline"] = model.baseline.kind.value
    else:
        doc["strategy"] = "single"
        doc["model"] = json.loads(serialize_model(model))
    return doc


def strategy_from_doc(doc: dict, calendar: HolidayCalendar):
    """Rebuild (model, spec, task, horizon_steps) from a model document."""
    from .models.io import deserialize_model
    from .strategies import hybrid_spec

    spec = spec_from_doc(doc["spec"])
    strategy = doc["strategy"]
    if strategy == "fusion":
        model = FusionModel(
            deserialize_model(json.dumps(doc["holiday"])),
            deserialize_model(json.dumps(doc["workday"])),
            doc["holiday_definition"],
            calendar,
            doc.get("tz", DEFAULT_TZ),
        )
    elif strategy == "hybrid":
        model = HybridModel(
            deserialize_model(json.dumps(doc["core"])),
            BaselineParams(BaselineKind(doc["baseline"])),
            hybrid_spec(spec),
        )
    else:
        model = deserialize_model(json.dumps(doc["model"]))
    return model, spec, doc["task"], int(doc["horizon_steps"])


def _strategy_fingerprint(model) -> str:
    import hashlib

    if isinstance(model, FusionModel):
        text = serialize_model(model.holiday_model) + serialize_model(model.workday_model)
        return hashlib.sha256(text.encode()).hexdigest()
    if isinstance(model, HybridModel):
        return model_fingerprint(model.core)
    return model_fingerprint(model)


@dataclass
class TaskData:
    """Cadence-matched series, covariate table, fitted spec and split points."""

    series: LoadSeries
    table: AlignedTable
    spec: FeatureSpec
    horizon_steps: int
    t_train: np.datetime64
    t_val: np.datetime64
    val_end: int


def prepare_task(
    record: ConsumerRecord,
    weather: WeatherSeries,
    calendar: HolidayCalendar,
    socio: SocioEconomicRecord | None,
    task: str,
    ctype: ConsumerType,
    tz: str = DEFAULT_TZ,
    split: tuple = (0.7, 0.15, 0.15),
) -> TaskData:
    """Resample, align and spec one consumer for one forecasting task."""
    if task == FIFTEEN_MIN and record.load.cadence != QUARTER:
        raise ConfigError(f"{record.consumer_id}: 15-min task needs quarter-hourly data")
    series = resample_to_hourly(record.load) if (
        task == DAY_AHEAD and record.load.cadence == QUARTER
    ) else record.load
    socio = socio if ctype is ConsumerType.RESIDENTIAL else None
    table = align_covariates(series, weather, calendar, socio=socio, tz=tz)
    n = len(table)
    train_end, val_end = _split_points(n, split)
    steps_per_hour = int(HOUR // table.cadence)
    if task == DAY_AHEAD:
        spec = day_ahead_spec(steps_per_hour, include_socio=socio is not None)
        horizon_steps = 24 * steps_per_hour
    else:
        spec = fifteen_min_spec(include_socio=socio is not None)
        horizon_steps = 1
    spec = apply_bounds(spec, fit_weather_bounds(table, train_end))
    return TaskData(
        series=series,
        table=table,
        spec=spec,
        horizon_steps=horizon_steps,
        t_train=table.timestamps[train_end],
        t_val=table.timestamps[val_end],
        val_end=val_end,
    )


def run_consumer_task(job: ConsumerJob, task: str, ctype: ConsumerType) -> TaskOutcome:
    config = job.config
    record = job.record
    data = prepare_task(record, job.weather, job.calendar, job.socio, task, ctype,
                        config.tz, config.split)
    table, spec, horizon_steps = data.table, data.spec, data.horizon_steps
    series, t_val, val_end = data.series, data.t_val, data.val_end
    n = len(table)

    override = config.overrides.get(record.consumer_id, ConsumerOverride())
    strategy = override.strategy or default_strategy(ctype)
    policy = (
        replace(config.policy, **override.policy) if override.policy else config.policy
    )

    matrix = build_matrix(table, spec, horizon_steps)
    params = config.gbdt
    if config.tuner_budget > 0:
        params = _tune_params(matrix, data.t_train, t_val, params, config.tuner_budget, job.seed)

    fit_rows = matrix.subset(matrix.between(None, t_val))  # train + validation
    test_table = table.slice(val_end, n)

    models: dict[str, object] = {}
    if strategy == "single":
        models["single"] = fit_ensemble(params, "boosted", fit_rows)
    else:
        if strategy == "hybrid":
            baseline = BaselineParams(_HYBRID_KIND[task])
            models[strategy] = fit_hybrid(table, spec, horizon_steps, params, baseline,
                                          train_until=t_val)
        elif strategy == "fusion":
            holiday_def = override.holiday_def or default_holiday_definition(ctype)
            models[strategy] = fit_fusion(
                fit_rows, params, job.calendar, holiday_def, config.tz,
                min_partition_rows=config.min_partition_rows,
            )
        else:
            raise ConfigError(f"unknown strategy {strategy!r}")
        if config.compare_single:
            models["single"] = fit_ensemble(params, "boosted", fit_rows)

    rolling = rolling_day_ahead if task == DAY_AHEAD else rolling_15min
    reports: dict[str, EvalReport] = {}
    for label, model in models.items():
        forecaster = MatrixForecaster(model, spec, horizon_steps, table)
        reports[label] = rolling(forecaster, test_table, policy, ctype)
    baseline_fc = BaselineForecaster(BaselineParams(_BASELINE_KIND[task]), series)
    reports["baseline"] = rolling(baseline_fc, test_table, policy, ctype)

    selected = models[strategy]
    selected_fc = MatrixForecaster(selected, spec, horizon_steps, table)
    values = selected_fc(test_table)
    forecast = ForecastSeries(record.consumer_id, record.zone_id, test_table.start,
                              test_table.cadence, values)
    return TaskOutcome(
        task=task,
        strategy=strategy,
        tuned_params=params,
        reports=reports,
        forecast=forecast,
        fingerprint=_strategy_fingerprint(selected),
        models={label: strategy_to_doc(m, spec, task, horizon_steps, config.tz)
                for label, m in models.items()},
    )


def run_consumer(job: ConsumerJob) -> ConsumerResult:
    record = job.record
    stage = "classify"
    try:
        hourly = resample_to_hourly(record.load) if record.load.cadence == QUARTER else record.load
        stats = profile_stats(hourly, job.calendar, job.config.tz)
        ctype, rule = classify_with_rule(stats)
        outcomes = []
        for task in job.config.tasks:
            stage = task
            outcomes.append(run_consumer_task(job, task, ctype))
        return ConsumerResult(
            consumer_id=record.consumer_id,
            zone_id=record.zone_id,
            declared=record.declared_type,
            classified=ctype,
            rule=rule,
            stats=stats.as_dict(),
            outcomes=outcomes,
        )
    except LoadcastError as exc:
        if isinstance(exc, CoverageError):
            stage = "align_covariates"
        return ConsumerResult(
            consumer_id=record.consumer_id,
            zone_id=record.zone_id,
            declared=record.declared_type,
            classified=ConsumerType.RESIDENTIAL,
            rule="",
            stats={},
            outcomes=[],
            error=str(exc),
            stage=stage,
        )


# ---------------------------------------------------------------------------
# Artifact writing


def _dump_json(obj, path: Path) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(obj, sort_keys=True, indent=2) + "\n")


def _write_consumer_artifacts(result: ConsumerResult, out: Path, config: RunConfig,
                              calendar: HolidayCalendar) -> None:
    cdir = out / "consumers" / result.consumer_id
    cdir.mkdir(parents=True, exist_ok=True)
    _dump_json(
        {
            "consumer_id": result.consumer_id,
            "zone_id": result.zone_id,
            "declared_type": result.declared.value if result.declared else None,
            "classified_type": result.classified.value,
            "rule": result.rule,
            "stats": result.stats,
            "error": result.error,
            "stage": result.stage,
        },
        cdir / "classification.json",
    )
    for outcome in result.outcomes:
        tdir = cdir / outcome.task
        tdir.mkdir(exist_ok=True)
        for label, doc in sorted(outcome.models.items()):
            _dump_json(doc, tdir / f"model_{label}.json")
        for label, report in sorted(outcome.reports.items()):
            _dump_json(report.summary(), tdir / f"eval_{label}.json")
            (tdir / f"eval_{label}_windows.csv").write_text(report.windows_csv())
            if config.render_plots:
                from .plotting import mape_evolution_svg

                mape_evolution_svg(report, tdir / f"eval_{label}.svg", calendar)
        _dump_json(
            {
                "consumer_id": result.consumer_id,
                "zone_id": result.zone_id,
                "task": outcome.task,
                "issued_at": outcome.forecast.start.strftime("%Y-%m-%dT%H:%M:%SZ"),
                "cadence_minutes": int(outcome.forecast.cadence.total_seconds() // 60),
                "model_fingerprint": outcome.fingerprint,
                "strategy": outcome.strategy,
                "params": outcome.tuned_params.to_dict(),
                "values_kw": [None if not np.isfinite(v) else float(v)
                              for v in outcome.forecast.values],
            },
            tdir / "forecast.json",
        )
        if outcome.strategy != "single" and "single" in outcome.reports:
            comparison = compare_reports(
                outcome.reports["single"], outcome.reports[outcome.strategy],
                "single", outcome.strategy,
            )
            (tdir / "comparison.csv").write_text(comparison.to_csv())


@dataclass
class PipelineResult:
    exit_code: int
    results: list
    out_dir: Path


def run_pipeline(config: RunConfig) -> PipelineResult:
    """Execute the full per-consumer pipeline and write all artifacts.

    Exit code 0 when every consumer meets its score targets on every task,
    2 when any consumer misses a target, 1 when any stage errored.
    """
    out = Path(config.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    ds = load_dataset(config)

    records = sorted(ds.records, key=lambda r: r.consumer_id)
    seeds = np.random.SeedSequence(config.seed).spawn(len(records))
    jobs = []
    results = []
    for record, seq in zip(records, seeds):
        if record.zone_id not in ds.weather:
            results.append(ConsumerResult(
                consumer_id=record.consumer_id,
                zone_id=record.zone_id,
                declared=record.declared_type,
                classified=ConsumerType.RESIDENTIAL,
                rule="",
                stats={},
                outcomes=[],
                error=f"no weather series for zone {record.zone_id!r}",
                stage="align_covariates",
            ))
            continue
        jobs.append(
            ConsumerJob(
                record=record,
                weather=ds.weather[record.zone_id],
                calendar=ds.calendar,
                socio=ds.socio.get(record.zone_id),
                config=config,
                seed=int(np.random.default_rng(seq).integers(0, 2**31 - 1)),
            )
        )
    if config.jobs > 1 and jobs:
        with ProcessPoolExecutor(max_workers=config.jobs) as pool:
            results.extend(pool.map(run_consumer, jobs))
    else:
        results.extend(run_consumer(job) for job in jobs)
    results.sort(key=lambda r: r.consumer_id)

    for result in results:
        _write_consumer_artifacts(result, out, config, ds.calendar)

    # classification summary plus confusion matrix against known labels
    rows = ["consumer_id,declared,classified,rule,c_h,c_w,c_sat,c_sun,hourly_std"]
    for r in results:
        s = r.stats
        rows.append(
            f"{r.consumer_id},{r.declared.value if r.declared else ''},{r.classified.value},"
            f"{r.rule},{s.get('c_h', float('nan')):.6f},{s.get('c_w', float('nan')):.6f},"
            f"{s.get('c_sat', float('nan')):.6f},{s.get('c_sun', float('nan')):.6f},"
            f"{s.get('hourly_std', float('nan')):.6f}"
        )
    (out / "classification.csv").write_text("\n".join(rows) + "\n")
    labeled = [r for r in results if r.declared is not None and not r.error]
    if labeled:
        counts = np.zeros((3, 3), dtype=np.int64)
        index = {t: i for i, t in enumerate(TYPE_ORDER)}
        for r in labeled:
            counts[index[r.declared], index[r.classified]] += 1
        (out / "confusion.csv").write_text(ConfusionMatrix(counts).to_csv())

    # location aggregation per task over the evaluation span
    for task in config.tasks:
        forecasts = [
            o.forecast
            for r in results
            for o in r.outcomes
            if o.task == task and np.all(np.isfinite(o.forecast.values))
        ]
        if not forecasts:
            continue
        per_loc = aggregate_forecasts(forecasts)
        lines = ["location,timestamp,kw"]
        for loc in sorted(per_loc):
            fc = per_loc[loc]
            for i, v in enumerate(fc.values):
                ts = fc.start + i * fc.cadence
                lines.append(f"{loc},{ts.strftime('%Y-%m-%dT%H:%M:%SZ')},{float(v)!r}")
        (out / f"aggregate_{task}.csv").write_text("\n".join(lines) + "\n")

    errored = [r for r in results if r.error]
    missed = [
        r
        for r in results
        if not r.error
        and any(not o.reports[o.strategy].passed for o in r.outcomes)
    ]
    exit_code = 1 if errored else (2 if missed else 0)
    _dump_json(
        {
            "exit_code": exit_code,
            "n_consumers": len(results),
            "errors": {r.consumer_id: {"stage": r.stage, "message": r.error} for r in errored},
            "missed_targets": sorted(r.consumer_id for r in missed),
            "tasks": list(config.tasks),
            "seed": config.seed,
        },
        out / "run_result.json",
    )
    return PipelineResult(exit_code=exit_code, results=results, out_dir=out)


# ---------------------------------------------------------------------------
# Report over written artifacts


def _load_json(path: Path):
    if not path.exists():
        raise ReportError(f"missing artifact: {path}")
    return json.loads(path.read_text())


def write_report(out_dir: str | Path) -> Path:
    """Summarize a completed run directory into summary.csv and summary.md.

    Reads only the on-disk artifacts, so rerunning over unchanged files
    yields byte-identical output.
    """
    out = Path(out_dir)
    run = _load_json(out / "run_result.json")
    consumers_dir = out / "consumers"
    if not consumers_dir.exists():
        raise ReportError(f"missing artifact: {consumers_dir}")

    rows = []
    for cdir in sorted(consumers_dir.iterdir()):
        cls = _load_json(cdir / "classification.json")
        for task in run["tasks"]:
            tdir = cdir / task
            if not tdir.exists():
                continue
            forecast = _load_json(tdir / "forecast.json")
            strategy = forecast["strategy"]
            selected = _load_json(tdir / f"eval_{strategy}.json")
            baseline = _load_json(tdir / "eval_baseline.json")
            single_path = tdir / "eval_single.json"
            single = _load_json(single_path) if single_path.exists() else None
            rows.append({
                "consumer_id": cls["consumer_id"],
                "task": task,
                "declared": cls["declared_type"] or "",
                "classified": cls["classified_type"],
                "strategy": strategy,
                "mape_pct": selected["aggregate_mape_pct"],
                "mae_kw": selected["aggregate_mae_kw"],
                "score_mape_pct": selected["score_mape_pct"],
                "score_mae_pct": selected["score_mae_pct"],
                "mape_threshold_pct": selected["mape_threshold_pct"],
                "mae_threshold_kw": selected["mae_threshold_kw"],
                "score_target_pct": selected["score_target_pct"],
                "passed": selected["passed"],
                "baseline_mape_pct": baseline["aggregate_mape_pct"],
                "single_mape_pct": single["aggregate_mape_pct"] if single else "",
                "single_score_mape_pct": single["score_mape_pct"] if single else "",
            })

    header = list(rows[0].keys()) if rows else ["consumer_id"]
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=header, lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow(row)
    (out / "summary.csv").write_text(buf.getvalue())

    md = ["# Run summary", "", f"- consumers: {run['n_consumers']}",
          f"- exit code: {run['exit_code']}", f"- seed: {run['seed']}", ""]
    if (out / "confusion.csv").exists():
        md += ["## Classification", "", "```",
               (out / "confusion.csv").read_text().rstrip(), "```", ""]
    for task in run["tasks"]:
        task_rows = [r for r in rows if r["task"] == task]
        if not task_rows:
            continue
        md += [f"## {task} forecasts", ""]
        md += ["| consumer | strategy | MAPE [%] | score [%] | single MAPE [%] | single score [%] | baseline MAPE [%] | passed |",
               "|---|---|---|---|---|---|---|---|"]
        for r in task_rows:
            fmt = lambda v: f"{v:.2f}" if isinstance(v, float) else (v or "-")
            md.append(
                f"| {r['consumer_id']} | {r['strategy']} | {fmt(r['mape_pct'])} | "
                f"{fmt(r['score_mape_pct'])} | {fmt(r['single_mape_pct'])} | "
                f"{fmt(r['single_score_mape_pct'])} | {fmt(r['baseline_mape_pct'])} | "
                f"{'yes' if r['passed'] else 'no'} |"
            )
        md.append("")
    (out / "summary.md").write_text("\n".join(md))
    return out / "summary.md"
