"""Experiment harness: configuration, synthetic data, and the full run loop.

A run sweeps (model, strategy, horizon, repeat) cells. Every cell derives its
own seed from the base seed and the cell key, so cells are independently
replayable and a parallel run reproduces the serial one byte for byte. All
file writes happen in the coordinating process.
"""

from __future__ import annotations

import datetime
import hashlib
import json
import time
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from multiprocessing import get_context
from pathlib import Path

import numpy as np

from .clpso import ModelConfig, SwarmConfig
from .data import (
    IliSeries,
    chronological_split,
    impute_missing,
    load_series,
    log_transform,
    make_supervised,
)
from .errors import ConfigError, FlucastError
from .evaluation import (
    METRIC_NAMES,
    aggregate_metrics,
    detect_outbreak_windows,
    friedman_test,
    mean_ranks,
    nemenyi_critical_difference,
)
from .models import model_from_dict, model_to_dict
from .strategies import ForecastPipeline, StrategyKind, rollout
from .tuning import ModelKind, TrainedPipeline, tune_and_train
from .util import derive_seed, dumps_exact

COMBO_ORDER = (
    ("svr", "iterated"),
    ("svr", "direct"),
    ("svr", "mimo"),
    ("mlp", "iterated"),
    ("mlp", "direct"),
    ("mlp", "mimo"),
)

_STRATEGY_LABEL = {"iterated": "Iter", "direct": "Dir", "mimo": "MIMO"}


def combo_label(model: str, strategy: str) -> str:
    """Row label in the report tables, e.g. SVR-Iter or MLP-MIMO."""
    return f"{model.upper()}-{_STRATEGY_LABEL[strategy]}"


@dataclass(frozen=True)
class ExperimentConfig:
    data_path: str
    output_dir: str
    horizons: tuple = tuple(range(2, 11))
    models: tuple = ("svr", "mlp")
    strategies: tuple = ("iterated", "direct", "mimo")
    repeats: int = 20
    base_seed: int = 0
    train_fraction: float = 2.0 / 3.0
    n_lags: int = 20
    swarm: SwarmConfig = field(default_factory=SwarmConfig)
    workers: int = 1
    save_pipelines: bool = True

    def __post_init__(self):
        object.__setattr__(self, "horizons", tuple(int(h) for h in self.horizons))
        object.__setattr__(self, "models", tuple(self.models))
        object.__setattr__(self, "strategies", tuple(self.strategies))
        if not self.horizons or any(h < 1 for h in self.horizons):
            raise ConfigError("horizons must be positive integers")
        for model in self.models:
            ModelKind(model)
        for strategy in self.strategies:
            StrategyKind(strategy)
        if self.repeats < 1:
            raise ConfigError("repeats must be at least 1")
        if not 0.0 < self.train_fraction < 1.0:
            raise ConfigError("train_fraction must lie in (0, 1)")
        if self.n_lags < 1:
            raise ConfigError("n_lags must be positive")
        if self.workers < 1:
            raise ConfigError("workers must be at least 1")

    def combos(self) -> list:
        return [
            (model, strategy)
            for model, strategy in COMBO_ORDER
            if model in self.models and strategy in self.strategies
        ]

    def to_dict(self) -> dict:
        return {
            "data_path": self.data_path,
            "output_dir": self.output_dir,
            "horizons": list(self.horizons),
            "models": list(self.models),
            "strategies": list(self.strategies),
            "repeats": self.repeats,
            "base_seed": self.base_seed,
            "train_fraction": self.train_fraction,
            "n_lags": self.n_lags,
            "swarm": {
                "swarm_size": self.swarm.swarm_size,
                "max_iterations": self.swarm.max_iterations,
                "stall_limit": self.swarm.stall_limit,
                "refreshing_gap": self.swarm.refreshing_gap,
                "acceleration": self.swarm.acceleration,
                "inertia_start": self.swarm.inertia_start,
                "inertia_end": self.swarm.inertia_end,
                "velocity_clamp": self.swarm.velocity_clamp,
            },
            "workers": self.workers,
            "save_pipelines": self.save_pipelines,
        }

    @staticmethod
    def from_dict(payload: dict) -> "ExperimentConfig":
        payload = dict(payload)
        swarm_payload = payload.pop("swarm", {})
        swarm = SwarmConfig(**swarm_payload)
        known = {
            "data_path",
            "output_dir",
            "horizons",
            "models",
            "strategies",
            "repeats",
            "base_seed",
            "train_fraction",
            "n_lags",
            "workers",
            "save_pipelines",
        }
        unknown = set(payload) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        return ExperimentConfig(swarm=swarm, **payload)

    def config_hash(self) -> str:
        payload = self.to_dict()
        # execution details do not change the science
        payload.pop("output_dir", None)
        payload.pop("workers", None)
        text = json.dumps(payload, sort_keys=True)
        return hashlib.sha256(text.encode("utf-8")).hexdigest()[:16]


def cell_seed(base_seed: int, model: str, strategy: str, horizon: int, repeat: int) -> int:
    """The run-scoped seed for one (model, strategy, horizon, repeat) cell."""
    return derive_seed(base_seed, model, strategy, horizon, repeat)


def weeks_in_year(year: int) -> int:
    """52 or 53 depending on the ISO calendar."""
    return datetime.date(year, 12, 28).isocalendar()[1]


def generate_synthetic_ili(years: int, seed: int, start_year: int = 2011) -> IliSeries:
    """Positive weekly rate series with winter peaks near week 52 +- 4.

    A Gaussian bump on the log10 scale is placed once per winter (including
    the winter preceding the first year, so January of year one is elevated)
    with multiplicative lognormal noise on top.
    """
    if years < 2:
        raise ValueError("need at least two years")
    rng = np.random.default_rng(seed)
    year_list = list(range(start_year, start_year + years))
    week_counts = [weeks_in_year(y) for y in year_list]
    total = int(np.sum(week_counts))
    offsets = {}
    cursor = 0
    for year, count in zip(year_list, week_counts):
        offsets[year] = cursor
        cursor += count
    t = np.arange(total, dtype=np.float64)
    log_rate = np.full(total, np.log10(2.0))
    sigma = 3.0
    amplitude = 0.8
    for year in range(start_year - 1, start_year + years):
        peak_week = 52 + int(rng.integers(-4, 5))
        if year in offsets:
            peak_pos = offsets[year] + peak_week - 1
        else:
            # winter before the first year: extrapolate backwards
            peak_pos = peak_week - 1 - weeks_in_year(year)
        bump = amplitude * (0.85 + 0.3 * rng.random())
        log_rate += bump * np.exp(-((t - peak_pos) ** 2) / (2.0 * sigma * sigma))
    log_rate += rng.normal(0.0, 0.03, size=total)
    years_col = np.concatenate(
        [np.full(count, year) for year, count in zip(year_list, week_counts)]
    )
    weeks_col = np.concatenate(
        [np.arange(1, count + 1) for count in week_counts]
    )
    return IliSeries(
        years=years_col,
        weeks=weeks_col,
        rates=np.power(10.0, log_rate),
        missing=np.zeros(total, dtype=bool),
    )


# ---------------------------------------------------------------------------
# pipeline persistence


def pipeline_to_dict(tp: TrainedPipeline) -> dict:
    return {
        "model_kind": tp.model_kind.value,
        "strategy": tp.pipeline.kind.value,
        "n_lags": tp.pipeline.n_lags,
        "horizon": tp.pipeline.horizon,
        "gbest_bits": tp.gbest_bits,
        "feature_mask": "".join(str(int(b)) for b in tp.pipeline.feature_mask),
        "parameters": {k: v for k, v in tp.config.parameters.items()},
        "fitness": float(tp.fitness),
        "generations": tp.generations,
        "evaluations": tp.evaluations,
        "wall_time": float(tp.wall_time),
        "models": [model_to_dict(m) for m in tp.pipeline.models],
    }


def pipeline_from_dict(payload: dict) -> TrainedPipeline:
    mask = np.array([c == "1" for c in payload["feature_mask"]], dtype=bool)
    pipeline = ForecastPipeline(
        kind=StrategyKind(payload["strategy"]),
        models=tuple(model_from_dict(m) for m in payload["models"]),
        feature_mask=mask,
        n_lags=int(payload["n_lags"]),
        horizon=int(payload["horizon"]),
    )
    config = ModelConfig(feature_mask=mask, parameters=payload["parameters"])
    return TrainedPipeline(
        pipeline=pipeline,
        config=config,
        model_kind=ModelKind(payload["model_kind"]),
        fitness=float(payload["fitness"]),
        generations=int(payload["generations"]),
        evaluations=int(payload["evaluations"]),
        wall_time=float(payload["wall_time"]),
        gbest_bits=str(payload.get("gbest_bits", "")),
    )


def save_pipeline(tp: TrainedPipeline, path) -> None:
    Path(path).write_text(dumps_exact(pipeline_to_dict(tp)) + "\n", encoding="utf-8")


def load_pipeline(path) -> TrainedPipeline:
    return pipeline_from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


# ---------------------------------------------------------------------------
# cell execution


def _run_cell(payload: dict) -> dict:
    """Tune, retrain, roll out, and score one experiment cell."""
    key = {
        "model": payload["model"],
        "strategy": payload["strategy"],
        "horizon": payload["horizon"],
        "repeat": payload["repeat"],
        "seed": payload["seed"],
    }
    started = time.perf_counter()
    try:
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            log_series = IliSeries(
                payload["years"], payload["weeks"], payload["log_rates"],
                np.zeros(len(payload["years"]), dtype=bool),
            )
            original = IliSeries(
                payload["years"], payload["weeks"], payload["rates"],
                np.zeros(len(payload["years"]), dtype=bool),
            )
            dataset = make_supervised(log_series, payload["n_lags"], payload["horizon"])
            train_set, test_set = chronological_split(dataset, payload["train_fraction"])
            swarm = replace(payload["swarm"], seed=payload["seed"])
            tuned = tune_and_train(
                train_set, payload["model"], payload["strategy"], swarm
            )
            table = rollout(tuned.pipeline, test_set)
            span = (
                int(test_set.origin_index.min()) + 1,
                int(test_set.origin_index.max()) + payload["horizon"],
            )
            windows = detect_outbreak_windows(original, span)
            row = aggregate_metrics(table, original, windows, payload["horizon"])
        record = dict(key)
        record.update(
            {
                "status": "ok",
                "metrics": row.as_dict(),
                "per_lead": {k: [float(v) for v in arr] for k, arr in row.per_lead.items()},
                "fitness": float(tuned.fitness),
                "generations": tuned.generations,
                "evaluations": tuned.evaluations,
                "selected_lags": int(tuned.config.feature_mask.sum()),
                "parameters": {k: v for k, v in tuned.config.parameters.items()},
                "warnings": sorted({str(w.message) for w in caught}),
                "wall_time": time.perf_counter() - started,
                "pipeline_json": (
                    dumps_exact(pipeline_to_dict(tuned)) if payload["save_pipelines"] else None
                ),
            }
        )
        return record
    except Exception as exc:  # recorded in the ledger; the run continues
        record = dict(key)
        record.update(
            {
                "status": "failed",
                "error": f"{type(exc).__name__}: {exc}",
                "warnings": [],
                "wall_time": time.perf_counter() - started,
            }
        )
        return record


# ---------------------------------------------------------------------------
# experiment loop and report writers


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    records: list
    output_dir: Path
    exit_code: int


def _prepare_series(config: ExperimentConfig) -> tuple[IliSeries, IliSeries]:
    try:
        series = load_series(config.data_path)
    except (OSError, FlucastError) as exc:
        raise ConfigError(f"cannot load data: {exc}") from exc
    original = impute_missing(series)
    return original, log_transform(original)


def run_experiment(config: ExperimentConfig) -> ExperimentResult:
    """Execute the full sweep and write reports under the output directory."""
    original, log_series = _prepare_series(config)
    out = Path(config.output_dir)
    out.mkdir(parents=True, exist_ok=True)

    payload_base = {
        "years": original.years,
        "weeks": original.weeks,
        "rates": original.rates,
        "log_rates": log_series.rates,
        "n_lags": config.n_lags,
        "train_fraction": config.train_fraction,
        "swarm": config.swarm,
        "save_pipelines": config.save_pipelines,
    }
    tasks = []
    for model, strategy in config.combos():
        for horizon in config.horizons:
            for repeat in range(config.repeats):
                payload = dict(payload_base)
                payload.update(
                    {
                        "model": model,
                        "strategy": strategy,
                        "horizon": horizon,
                        "repeat": repeat,
                        "seed": cell_seed(
                            config.base_seed, model, strategy, horizon, repeat
                        ),
                    }
                )
                tasks.append(payload)

    if config.workers == 1:
        records = [_run_cell(t) for t in tasks]
    else:
        context = get_context("spawn")
        with ProcessPoolExecutor(max_workers=config.workers, mp_context=context) as pool:
            records = list(pool.map(_run_cell, tasks))

    config_hash = config.config_hash()
    for record in records:
        record["config_hash"] = config_hash

    _write_ledger(records, out / "ledger.jsonl")
    if config.save_pipelines:
        pipedir = out / "pipelines"
        pipedir.mkdir(exist_ok=True)
        for record in records:
            if record["status"] == "ok" and record.get("pipeline_json"):
                name = (
                    f"pipeline_{record['model']}-{record['strategy']}"
                    f"_h{record['horizon']}_r{record['repeat']}.json"
                )
                (pipedir / name).write_text(record["pipeline_json"] + "\n", encoding="utf-8")
    if any(r["status"] == "ok" for r in records):
        write_reports(records, config, out)
    failed = [r for r in records if r["status"] != "ok"]
    return ExperimentResult(
        config=config,
        records=records,
        output_dir=out,
        exit_code=2 if failed else 0,
    )


def _write_ledger(records, path: Path) -> None:
    lines = []
    for record in records:
        row = {k: v for k, v in record.items() if k != "pipeline_json"}
        lines.append(json.dumps(row, sort_keys=True))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_ledger(path) -> list:
    return [json.loads(line) for line in Path(path).read_text(encoding="utf-8").splitlines() if line]


def _collect_scores(records, combos, horizons, repeats):
    """scores[metric][horizon] as an (repeats x n_combos) matrix or None."""
    index = {
        (r["model"], r["strategy"], r["horizon"], r["repeat"]): r
        for r in records
        if r["status"] == "ok"
    }
    scores = {name: {} for name in METRIC_NAMES}
    for name in METRIC_NAMES:
        for horizon in horizons:
            matrix = np.full((repeats, len(combos)), np.nan)
            for col, (model, strategy) in enumerate(combos):
                for repeat in range(repeats):
                    record = index.get((model, strategy, horizon, repeat))
                    if record is not None:
                        matrix[repeat, col] = record["metrics"][name]
            scores[name][horizon] = matrix
    return scores


def _column_mean_std(scores, name, horizon, col) -> tuple[float, float]:
    column = scores[name][horizon][:, col]
    valid = column[np.isfinite(column)]
    if len(valid) == 0:
        return float("nan"), float("nan")
    return float(np.mean(valid)), float(np.std(valid))


def emit_plot_data(records, config: ExperimentConfig, out) -> None:
    """Long-format curve files: one row per (model, strategy, horizon).

    Means are the same pass-through values that the metric tables report.
    Raises when the record list holds no successful runs.
    """
    if not any(r["status"] == "ok" for r in records):
        raise ConfigError("no successful runs to plot")
    combos = config.combos()
    horizons = list(config.horizons)
    scores = _collect_scores(records, combos, horizons, config.repeats)
    out = Path(out)
    for name in METRIC_NAMES:
        curve_lines = ["model,strategy,horizon,mean,std"]
        for i, (model, strategy) in enumerate(combos):
            for horizon in horizons:
                mean, std = _column_mean_std(scores, name, horizon, i)
                curve_lines.append(f"{model},{strategy},{horizon},{mean!r},{std!r}")
        (out / f"curves_{name}.csv").write_text("\n".join(curve_lines) + "\n", encoding="utf-8")


def write_reports(records, config: ExperimentConfig, out: Path) -> None:
    """Emit the wide metric tables, long-format curves, and significance files."""
    combos = config.combos()
    horizons = list(config.horizons)
    repeats = config.repeats
    scores = _collect_scores(records, combos, horizons, repeats)
    labels = [combo_label(m, s) for m, s in combos]
    emit_plot_data(records, config, out)

    for name in METRIC_NAMES:
        lines = ["combo," + ",".join(f"h={h}" for h in horizons)]
        means = np.full((len(combos), len(horizons)), np.nan)
        for i, label in enumerate(labels):
            cells = []
            for j, horizon in enumerate(horizons):
                value, _ = _column_mean_std(scores, name, horizon, i)
                means[i, j] = value
                cells.append(repr(value))
            lines.append(labels[i] + "," + ",".join(cells))
        best = []
        for j in range(len(horizons)):
            col = means[:, j]
            best.append(labels[int(np.nanargmin(col))] if np.any(np.isfinite(col)) else "")
        lines.append("best," + ",".join(best))
        (out / f"metrics_{name}.csv").write_text("\n".join(lines) + "\n", encoding="utf-8")

        for horizon in horizons:
            matrix = scores[name][horizon]
            if repeats < 2 or len(combos) < 2 or not np.all(np.isfinite(matrix)):
                continue
            statistic, p_value = friedman_test(matrix)
            ranks = mean_ranks(matrix)
            payload = {
                "metric": name,
                "horizon": horizon,
                "treatments": labels,
                "friedman_statistic": float(statistic),
                "p_value": float(p_value),
                "mean_ranks": [float(r) for r in ranks],
                "alpha": 0.05,
            }
            if 2 <= len(combos) <= 10:
                cd = nemenyi_critical_difference(len(combos), repeats)
                gap = np.abs(ranks[:, None] - ranks[None, :])
                pairs = [
                    [labels[i], labels[j]]
                    for i in range(len(combos))
                    for j in range(i + 1, len(combos))
                    if gap[i, j] >= cd
                ]
                payload["critical_difference"] = float(cd)
                payload["significant_pairs"] = pairs
            (out / f"significance_h{horizon}_{name}.json").write_text(
                dumps_exact(payload) + "\n", encoding="utf-8"
            )


def report_from_ledger(ledger_path, out_dir) -> None:
    """Recompute every report file from a previously written ledger."""
    records = read_ledger(ledger_path)
    if not records:
        raise ConfigError("ledger is empty")
    models, strategies, horizons, repeats = set(), set(), set(), 0
    for record in records:
        models.add(record["model"])
        strategies.add(record["strategy"])
        horizons.add(record["horizon"])
        repeats = max(repeats, record["repeat"] + 1)
    config = ExperimentConfig(
        data_path="<ledger>",
        output_dir=str(out_dir),
        horizons=tuple(sorted(horizons)),
        models=tuple(m for m in ("svr", "mlp") if m in models),
        strategies=tuple(s for s in ("iterated", "direct", "mimo") if s in strategies),
        repeats=repeats,
        save_pipelines=False,
    )
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_reports(records, config, out)
