"""Command-line entry points wiring the pipeline end to end.

Subcommands: synth, classify, features select, tune, train, forecast,
evaluate, aggregate, report, run. The `run` command executes the whole
chain per a JSON config and exits 0 only when every consumer meets its
quantitative score targets (2 on a miss, 1 on error).
"""

from __future__ import annotations

import json
import sys
from dataclasses import replace
from datetime import timedelta
from pathlib import Path

import click
import numpy as np

from .classifier import ConsumerType, evaluate_classifier
from .data import DEFAULT_TZ, HOUR, QUARTER, parse_timestamp
from .errors import ConfigError, LoadcastError
from .evaluation import DAY_AHEAD, FIFTEEN_MIN, ThresholdPolicy, rolling_15min, rolling_day_ahead
from .features import AblationProtocol, FeatureSpec, ablate_features, build_matrix
from .models.baselines import BaselineParams
from .models.ensemble import GBDTParams, fit_ensemble
from .pipeline import (
    Dataset,
    load_run_config,
    prepare_task,
    read_dataset,
    run_pipeline,
    strategy_from_doc,
    strategy_to_doc,
    write_dataset,
    write_report,
    _HYBRID_KIND,
)
from .strategies import (
    MatrixForecaster,
    default_holiday_definition,
    default_strategy,
    fit_fusion,
    fit_hybrid,
)
from .synthgen import generate_fleet
from .tuner import Dimension, SearchSpace, TPEConfig, tune as tpe_tune

_CADENCE = {15: QUARTER, 60: HOUR}
_TASKS = (DAY_AHEAD, FIFTEEN_MIN)


def _fail(message: str) -> None:
    click.echo(f"error: {message}", err=True)
    sys.exit(1)


@click.group()
@click.option("--config", "config_path", type=click.Path(exists=True), default=None,
              help="JSON run configuration (used by `run`).")
@click.option("--seed", type=int, default=None, help="Override the run seed.")
@click.option("--jobs", type=int, default=None, help="Parallel consumer pipelines.")
@click.option("--out", "out_dir", type=click.Path(), default=None, help="Output directory.")
@click.pass_context
def main(ctx, config_path, seed, jobs, out_dir):
    """Consumer-type-aware load classification and forecasting toolkit."""
    ctx.ensure_object(dict)
    ctx.obj.update(config=config_path, seed=seed, jobs=jobs, out=out_dir)


def _resolved(ctx, key, flag_value, default=None):
    if flag_value is not None:
        return flag_value
    if ctx.obj.get(key) is not None:
        return ctx.obj[key]
    return default


def _load_data(data_dir: str, cadence_minutes: int) -> Dataset:
    try:
        return read_dataset(Path(data_dir), _CADENCE[cadence_minutes])
    except LoadcastError as exc:
        _fail(str(exc))


def _find_record(ds: Dataset, consumer_id: str):
    for record in ds.records:
        if record.consumer_id == consumer_id:
            return record
    _fail(f"consumer {consumer_id!r} not found; available: "
          f"{', '.join(r.consumer_id for r in ds.records)}")


def _classify_record(ds: Dataset, record, tz: str):
    from .classifier import classify_with_rule, profile_stats
    from .data import resample_to_hourly

    hourly = resample_to_hourly(record.load) if record.load.cadence == QUARTER else record.load
    stats = profile_stats(hourly, ds.calendar, tz)
    ctype, rule = classify_with_rule(stats)
    return stats, ctype, rule


@main.command()
@click.option("--industrial", type=int, default=30, show_default=True)
@click.option("--commercial", type=int, default=30, show_default=True)
@click.option("--residential", type=int, default=6, show_default=True)
@click.option("--weeks", type=int, default=52, show_default=True)
@click.option("--cadence", type=click.Choice(["15", "60"]), default="60", show_default=True,
              help="Sampling cadence in minutes.")
@click.option("--seed", type=int, default=None)
@click.option("--out", "out_dir", type=click.Path(), default=None, required=False)
@click.pass_context
def synth(ctx, industrial, commercial, residential, weeks, cadence, seed, out_dir):
    """Generate a labeled synthetic fleet in the ingestion file schemas."""
    seed = _resolved(ctx, "seed", seed, 0)
    out_dir = _resolved(ctx, "out", out_dir)
    if out_dir is None:
        _fail("an output directory is required (--out)")
    counts = {
        ConsumerType.INDUSTRIAL: industrial,
        ConsumerType.COMMERCIAL: commercial,
        ConsumerType.RESIDENTIAL: residential,
    }
    counts = {t: n for t, n in counts.items() if n > 0}
    fleet = generate_fleet(counts, seed=seed, span_weeks=weeks, cadence=_CADENCE[int(cadence)])
    ds = Dataset(list(fleet.records), dict(fleet.weather), fleet.calendar,
                 dict(fleet.socio), fleet.labels())
    write_dataset(ds, Path(out_dir))
    click.echo(f"wrote {len(ds.records)} consumers to {out_dir}")


@main.command()
@click.option("--data", "data_dir", type=click.Path(exists=True), required=True)
@click.option("--cadence", type=click.Choice(["15", "60"]), default="60", show_default=True)
@click.option("--tz", default=DEFAULT_TZ, show_default=True)
@click.option("--out", "out_file", type=click.Path(), default=None,
              help="Write the JSON here instead of stdout.")
@click.option("--confusion", "confusion_file", type=click.Path(), default=None,
              help="Also write a confusion-matrix CSV (needs labels.csv).")
@click.pass_context
def classify(ctx, data_dir, cadence, tz, out_file, confusion_file):
    """Classify every consumer; emit type, statistics and the rule fired."""
    ds = _load_data(data_dir, int(cadence))
    out = {}
    try:
        for record in sorted(ds.records, key=lambda r: r.consumer_id):
            stats, ctype, rule = _classify_record(ds, record, tz)
            out[record.consumer_id] = {
                "type": ctype.value,
                "rule": rule,
                "stats": {**stats.as_dict(), "hourly_means": [float(v) for v in stats.hourly_means]},
            }
    except LoadcastError as exc:
        _fail(str(exc))
    text = json.dumps(out, sort_keys=True, indent=2)
    if out_file:
        Path(out_file).write_text(text + "\n")
    else:
        click.echo(text)
    if confusion_file:
        if not ds.labels:
            _fail("labels.csv is required for --confusion")
        cm = evaluate_classifier(
            [r for r in ds.records if r.declared_type is not None],
            {t: 1 for t in ConsumerType}, ds.calendar, tz,
        )
        Path(confusion_file).write_text(cm.to_csv())
        click.echo(f"confusion matrix written to {confusion_file}", err=True)


@main.group()
def features():
    """Feature engineering utilities."""


@features.command("select")
@click.option("--data", "data_dir", type=click.Path(exists=True), required=True)
@click.option("--consumer", required=True)
@click.option("--task", type=click.Choice(_TASKS), default=DAY_AHEAD, show_default=True)
@click.option("--cadence", type=click.Choice(["15", "60"]), default="60", show_default=True)
@click.option("--tz", default=DEFAULT_TZ, show_default=True)
@click.option("--out", "out_dir", type=click.Path(), default=None)
@click.pass_context
def features_select(ctx, data_dir, consumer, task, cadence, tz, out_dir):
    """Ablation-based selection: keep covariates that reduce validation error."""
    out_dir = Path(_resolved(ctx, "out", out_dir) or ".")
    out_dir.mkdir(parents=True, exist_ok=True)
    ds = _load_data(data_dir, int(cadence))
    record = _find_record(ds, consumer)
    try:
        _, ctype, _ = _classify_record(ds, record, tz)
        data = prepare_task(record, ds.weather[record.zone_id], ds.calendar,
                            ds.socio.get(record.zone_id), task, ctype, tz)
        base = FeatureSpec(tuple(d for d in data.spec if d.kind == "target-lag"))
        candidates = FeatureSpec(tuple(d for d in data.spec if d.kind != "target-lag"))
        protocol = AblationProtocol(
            horizon=data.horizon_steps,
            train_until=data.t_train,
            validate_until=data.t_val,
            model_configs=(
                ("gbdt", GBDTParams(n_trees=150, learning_rate=0.08, max_leaves=31,
                                    min_samples_leaf=10, seed=0), "boosted"),
                ("gbdt-alt", GBDTParams(n_trees=250, learning_rate=0.05, max_leaves=15,
                                        min_samples_leaf=10, seed=1), "boosted"),
            ),
        )
        report = ablate_features(candidates, base, data.table, protocol)
    except LoadcastError as exc:
        _fail(str(exc))
    (out_dir / "ablation.csv").write_text(report.to_csv())
    (out_dir / "selected.json").write_text(json.dumps({
        "notes": report.notes,
        "base": list(report.base_names),
        "selected": list(report.selected),
    }, sort_keys=True, indent=2) + "\n")
    click.echo(f"selected: {', '.join(report.selected) or '(none)'}")


def _space_from_file(path: str) -> SearchSpace:
    raw = json.loads(Path(path).read_text())
    dims = []
    for name, spec in sorted(raw.items()):
        dims.append(Dimension(
            name=name,
            kind=spec["kind"],
            lo=spec.get("lo"),
            hi=spec.get("hi"),
            log=bool(spec.get("log", False)),
            choices=tuple(spec.get("choices", ())),
        ))
    return SearchSpace(tuple(dims))


@main.command(name="tune")
@click.option("--space", "space_file", type=click.Path(exists=True), required=True,
              help="JSON search-space file: {name: {kind, lo, hi, log, choices}}.")
@click.option("--data", "data_dir", type=click.Path(exists=True), required=True)
@click.option("--consumer", required=True)
@click.option("--task", type=click.Choice(_TASKS), default=DAY_AHEAD, show_default=True)
@click.option("--cadence", type=click.Choice(["15", "60"]), default="60", show_default=True)
@click.option("--budget", type=int, default=40, show_default=True)
@click.option("--seed", type=int, default=None)
@click.option("--tz", default=DEFAULT_TZ, show_default=True)
@click.option("--out", "out_dir", type=click.Path(), default=None)
@click.pass_context
def tune_cmd(ctx, space_file, data_dir, consumer, task, cadence, budget, seed, tz, out_dir):
    """TPE search minimizing validation RMSE for one consumer and task."""
    seed = _resolved(ctx, "seed", seed, 0)
    out_dir = Path(_resolved(ctx, "out", out_dir) or ".")
    out_dir.mkdir(parents=True, exist_ok=True)
    ds = _load_data(data_dir, int(cadence))
    record = _find_record(ds, consumer)
    try:
        space = _space_from_file(space_file)
        _, ctype, _ = _classify_record(ds, record, tz)
        data = prepare_task(record, ds.weather[record.zone_id], ds.calendar,
                            ds.socio.get(record.zone_id), task, ctype, tz)
        matrix = build_matrix(data.table, data.spec, data.horizon_steps)
        train = matrix.subset(matrix.between(None, data.t_train))
        val = matrix.subset(matrix.between(data.t_train, data.t_val))
        from .evaluation import rmse
        from .models.ensemble import predict_ensemble

        def objective(assignment):
            params = replace(GBDTParams(), seed=0, **assignment)
            return rmse(val.y, predict_ensemble(fit_ensemble(params, "boosted", train), val))

        result = tpe_tune(objective, space, TPEConfig(seed=seed), budget)
    except LoadcastError as exc:
        _fail(str(exc))
    (out_dir / "trials.csv").write_text(result.history_csv(space))
    (out_dir / "best_params.json").write_text(json.dumps({
        "objective_rmse_kw": result.best.objective,
        "params": result.best.assignment,
        "budget": budget,
        "seed": seed,
        "notes": "space and budget are artifact defaults, not reproductions",
    }, sort_keys=True, indent=2) + "\n")
    click.echo(f"best RMSE {result.best.objective:.4f} kW with {result.best.assignment}")


@main.command()
@click.option("--data", "data_dir", type=click.Path(exists=True), required=True)
@click.option("--consumer", required=True)
@click.option("--task", type=click.Choice(_TASKS), default=DAY_AHEAD, show_default=True)
@click.option("--cadence", type=click.Choice(["15", "60"]), default="60", show_default=True)
@click.option("--strategy", type=click.Choice(["auto", "single", "fusion", "hybrid"]),
              default="auto", show_default=True)
@click.option("--holiday-def", type=click.Choice(["auto", "ph", "ph+we"]), default="auto",
              show_default=True)
@click.option("--params", "params_file", type=click.Path(exists=True), default=None,
              help="best_params.json from `tune`.")
@click.option("--tz", default=DEFAULT_TZ, show_default=True)
@click.option("--out", "out_file", type=click.Path(), required=True)
@click.pass_context
def train(ctx, data_dir, consumer, task, cadence, strategy, holiday_def, params_file, tz, out_file):
    """Fit the per-type strategy model and write its JSON document."""
    ds = _load_data(data_dir, int(cadence))
    record = _find_record(ds, consumer)
    try:
        _, ctype, _ = _classify_record(ds, record, tz)
        data = prepare_task(record, ds.weather[record.zone_id], ds.calendar,
                            ds.socio.get(record.zone_id), task, ctype, tz)
        params = GBDTParams()
        if params_file:
            best = json.loads(Path(params_file).read_text())
            params = replace(params, **best["params"])
        if strategy == "auto":
            strategy = default_strategy(ctype)
        matrix = build_matrix(data.table, data.spec, data.horizon_steps)
        fit_rows = matrix.subset(matrix.between(None, data.t_val))
        if strategy == "fusion":
            hdef = default_holiday_definition(ctype) if holiday_def == "auto" else holiday_def
            model = fit_fusion(fit_rows, params, ds.calendar, hdef, tz)
        elif strategy == "hybrid":
            baseline = BaselineParams(_HYBRID_KIND[task])
            model = fit_hybrid(data.table, data.spec, data.horizon_steps, params, baseline,
                               train_until=data.t_val)
        else:
            model = fit_ensemble(params, "boosted", fit_rows)
    except LoadcastError as exc:
        _fail(str(exc))
    doc = strategy_to_doc(model, data.spec, task, data.horizon_steps, tz)
    Path(out_file).write_text(json.dumps(doc, sort_keys=True, indent=2) + "\n")
    click.echo(f"trained {strategy} model for {consumer} ({task}) -> {out_file}")


@main.command()
@click.option("--data", "data_dir", type=click.Path(exists=True), required=True)
@click.option("--consumer", required=True)
@click.option("--model", "model_file", type=click.Path(exists=True), required=True)
@click.option("--cadence", type=click.Choice(["15", "60"]), default="60", show_default=True)
@click.option("--issue-at", default=None,
              help="Forecast issue time (ISO-8601 UTC); default: one horizon before span end.")
@click.option("--out", "out_file", type=click.Path(), required=True)
@click.pass_context
def forecast(ctx, data_dir, consumer, model_file, cadence, issue_at, out_file):
    """Issue one forecast (24 h or 15 min) and write the artifact JSON."""
    ds = _load_data(data_dir, int(cadence))
    record = _find_record(ds, consumer)
    try:
        doc = json.loads(Path(model_file).read_text())
        model, spec, task, horizon_steps = strategy_from_doc(doc, ds.calendar)
        tz = doc.get("tz", DEFAULT_TZ)
        _, ctype, _ = _classify_record(ds, record, tz)
        data = prepare_task(record, ds.weather[record.zone_id], ds.calendar,
                            ds.socio.get(record.zone_id), task, ctype, tz)
        table = data.table
        step = table.cadence
        if issue_at is None:
            first_idx = len(table) - horizon_steps
        else:
            first_idx = table.index_of(parse_timestamp(issue_at)) + 1
        if not 0 < first_idx <= len(table) - horizon_steps:
            raise ConfigError("issue time leaves no room for the forecast horizon")
        target = table.slice(first_idx, first_idx + horizon_steps)
        forecaster = MatrixForecaster(model, spec, horizon_steps, table)
        values = forecaster(target)
        from .pipeline import _strategy_fingerprint

        artifact = {
            "consumer_id": record.consumer_id,
            "zone_id": record.zone_id,
            "task": task,
            "issued_at": target.start.strftime("%Y-%m-%dT%H:%M:%SZ"),
            "cadence_minutes": int(step.total_seconds() // 60),
            "model_fingerprint": _strategy_fingerprint(model),
            "values_kw": [None if not np.isfinite(v) else float(v) for v in values],
        }
    except LoadcastError as exc:
        _fail(str(exc))
    Path(out_file).write_text(json.dumps(artifact, sort_keys=True, indent=2) + "\n")
    click.echo(f"forecast for {consumer} issued at {artifact['issued_at']} -> {out_file}")


@main.command()
@click.option("--data", "data_dir", type=click.Path(exists=True), required=True)
@click.option("--consumer", required=True)
@click.option("--model", "model_file", type=click.Path(exists=True), required=True)
@click.option("--cadence", type=click.Choice(["15", "60"]), default="60", show_default=True)
@click.option("--out", "out_dir", type=click.Path(), default=None)
@click.pass_context
def evaluate(ctx, data_dir, consumer, model_file, cadence, out_dir):
    """Rolling-origin evaluation of a trained model over the test split."""
    out_dir = Path(_resolved(ctx, "out", out_dir) or ".")
    out_dir.mkdir(parents=True, exist_ok=True)
    ds = _load_data(data_dir, int(cadence))
    record = _find_record(ds, consumer)
    try:
        doc = json.loads(Path(model_file).read_text())
        model, spec, task, horizon_steps = strategy_from_doc(doc, ds.calendar)
        tz = doc.get("tz", DEFAULT_TZ)
        _, ctype, _ = _classify_record(ds, record, tz)
        data = prepare_task(record, ds.weather[record.zone_id], ds.calendar,
                            ds.socio.get(record.zone_id), task, ctype, tz)
        test_table = data.table.slice(data.val_end, len(data.table))
        forecaster = MatrixForecaster(model, spec, horizon_steps, data.table)
        rolling = rolling_day_ahead if task == DAY_AHEAD else rolling_15min
        report = rolling(forecaster, test_table, ThresholdPolicy(), ctype)
    except LoadcastError as exc:
        _fail(str(exc))
    (out_dir / "report.json").write_text(report.to_json() + "\n")
    (out_dir / "windows.csv").write_text(report.windows_csv())
    from .plotting import mape_evolution_svg

    mape_evolution_svg(report, out_dir / "mape_evolution.svg", ds.calendar)
    click.echo(
        f"{consumer} {task}: MAPE {report.aggregate_mape:.2f}% "
        f"score {report.score_mape:.1f}% (target {report.policy.score_target(task):.0f}%) "
        f"passed={report.passed}"
    )


@main.command()
@click.option("--run", "run_dir", type=click.Path(exists=True), required=True,
              help="A completed `run` output directory.")
@click.option("--task", type=click.Choice(_TASKS), default=DAY_AHEAD, show_default=True)
@click.option("--out", "out_file", type=click.Path(), required=True)
def aggregate(run_dir, task, out_file):
    """Sum per-consumer forecasts into per-location series."""
    from .strategies import ForecastSeries, aggregate_forecasts

    run_dir = Path(run_dir)
    forecasts = []
    for path in sorted(run_dir.glob(f"consumers/*/{task}/forecast.json")):
        doc = json.loads(path.read_text())
        values = np.array([np.nan if v is None else v for v in doc["values_kw"]])
        if not np.all(np.isfinite(values)):
            continue
        forecasts.append(ForecastSeries(
            consumer_id=doc["consumer_id"],
            location=doc.get("zone_id", "default"),
            start=parse_timestamp(doc["issued_at"]),
            cadence=timedelta(minutes=doc["cadence_minutes"]),
            values=values,
        ))
    if not forecasts:
        _fail(f"no {task} forecast artifacts under {run_dir}")
    try:
        per_loc = aggregate_forecasts(forecasts)
    except LoadcastError as exc:
        _fail(str(exc))
    lines = ["location,timestamp,kw"]
    for loc in sorted(per_loc):
        fc = per_loc[loc]
        for i, v in enumerate(fc.values):
            ts = fc.start + i * fc.cadence
            lines.append(f"{loc},{ts.strftime('%Y-%m-%dT%H:%M:%SZ')},{float(v)!r}")
    Path(out_file).write_text("\n".join(lines) + "\n")
    click.echo(f"aggregated {len(forecasts)} forecasts into {len(per_loc)} locations -> {out_file}")


@main.command()
@click.option("--run", "run_dir", type=click.Path(exists=True), required=True)
def report(run_dir):
    """Summarize a completed run directory (summary.csv + summary.md)."""
    try:
        path = write_report(run_dir)
    except LoadcastError as exc:
        _fail(str(exc))
    click.echo(f"summary written to {path}")


@main.command()
@click.option("--config", "config_path", type=click.Path(exists=True), default=None)
@click.option("--seed", type=int, default=None)
@click.option("--jobs", type=int, default=None)
@click.option("--out", "out_dir", type=click.Path(), default=None)
@click.pass_context
def run(ctx, config_path, seed, jobs, out_dir):
    """End-to-end pipeline: classify, train, evaluate, aggregate, report."""
    config_path = _resolved(ctx, "config", config_path)
    if config_path is None:
        _fail("a JSON config is required (--config)")
    try:
        config = load_run_config(
            config_path,
            seed=_resolved(ctx, "seed", seed),
            jobs=_resolved(ctx, "jobs", jobs),
            out_dir=_resolved(ctx, "out", out_dir),
        )
        result = run_pipeline(config)
        write_report(result.out_dir)
    except LoadcastError as exc:
        _fail(str(exc))
    for r in result.results:
        if r.error:
            click.echo(f"{r.consumer_id}: ERROR at stage {r.stage}: {r.error}", err=True)
    click.echo(f"run complete: exit={result.exit_code} artifacts={result.out_dir}")
    sys.exit(result.exit_code)


if __name__ == "__main__":
    main()
