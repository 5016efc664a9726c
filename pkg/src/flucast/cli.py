"""Command line interface.

Verbs: ``synth`` generates data, ``run`` executes the full experiment,
``tune`` fits a single (model, strategy, horizon) pipeline, ``forecast``
applies a saved pipeline, ``report`` rebuilds tables from a ledger.
Exit codes: 0 success, 1 configuration or data error, 2 partial failures
recorded in the ledger.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from .clpso import SwarmConfig
from .data import (
    chronological_split,
    impute_missing,
    load_series,
    log_transform,
    make_supervised,
    write_series_csv,
)
from .errors import FlucastError
from .harness import (
    ExperimentConfig,
    cell_seed,
    generate_synthetic_ili,
    load_pipeline,
    report_from_ledger,
    run_experiment,
    save_pipeline,
)
from .strategies import LagWindow
from .tuning import tune_and_train


def _parse_horizons(text: str) -> tuple:
    if "-" in text and "," not in text:
        lo, hi = text.split("-", 1)
        return tuple(range(int(lo), int(hi) + 1))
    return tuple(int(part) for part in text.split(",") if part)


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="flucast")
    sub = parser.add_subparsers(dest="verb", required=True)

    synth = sub.add_parser("synth", help="generate a synthetic weekly series")
    synth.add_argument("--years", type=int, required=True)
    synth.add_argument("--seed", type=int, default=0)
    synth.add_argument("--start-year", type=int, default=2011)
    synth.add_argument("--out", required=True)

    run = sub.add_parser("run", help="run the full experiment")
    run.add_argument("--config", help="JSON config file; flags override its values")
    run.add_argument("--data")
    run.add_argument("--out")
    run.add_argument("--horizons", help="e.g. 2-10 or 2,4")
    run.add_argument("--repeats", type=int)
    run.add_argument("--seed", type=int)
    run.add_argument("--models", help="comma list from svr,mlp")
    run.add_argument("--strategies", help="comma list from iterated,direct,mimo")
    run.add_argument("--workers", type=int)
    run.add_argument("--serial", action="store_true", help="force workers=1")
    run.add_argument("--n-lags", type=int)
    run.add_argument("--train-fraction", type=float)
    run.add_argument("--swarm-size", type=int)
    run.add_argument("--max-iterations", type=int)
    run.add_argument("--stall-limit", type=int)

    tune = sub.add_parser("tune", help="tune one model/strategy/horizon cell")
    tune.add_argument("--data", required=True)
    tune.add_argument("--model", required=True, choices=["svr", "mlp"])
    tune.add_argument("--strategy", required=True, choices=["iterated", "direct", "mimo"])
    tune.add_argument("--horizon", type=int, required=True)
    tune.add_argument("--seed", type=int, default=0)
    tune.add_argument("--repeat", type=int, default=0)
    tune.add_argument("--n-lags", type=int, default=20)
    tune.add_argument("--train-fraction", type=float, default=2.0 / 3.0)
    tune.add_argument("--swarm-size", type=int, default=8)
    tune.add_argument("--max-iterations", type=int, default=200)
    tune.add_argument("--stall-limit", type=int, default=30)
    tune.add_argument("--out", required=True, help="pipeline JSON path")

    forecast = sub.add_parser("forecast", help="apply a saved pipeline")
    forecast.add_argument("--pipeline", required=True)
    forecast.add_argument("--data", required=True)
    forecast.add_argument("--out", help="CSV path; stdout when omitted")

    report = sub.add_parser("report", help="rebuild report files from a ledger")
    report.add_argument("--ledger", required=True)
    report.add_argument("--out", required=True)
    return parser


def _cmd_synth(args) -> int:
    series = generate_synthetic_ili(args.years, args.seed, args.start_year)
    write_series_csv(series, args.out)
    print(f"wrote {len(series)} weeks to {args.out}")
    return 0


def _cmd_run(args) -> int:
    payload = {}
    if args.config:
        payload = json.loads(Path(args.config).read_text(encoding="utf-8"))
    if args.data:
        payload["data_path"] = args.data
    if args.out:
        payload["output_dir"] = args.out
    if args.horizons:
        payload["horizons"] = list(_parse_horizons(args.horizons))
    if args.repeats is not None:
        payload["repeats"] = args.repeats
    if args.seed is not None:
        payload["base_seed"] = args.seed
    if args.models:
        payload["models"] = args.models.split(",")
    if args.strategies:
        payload["strategies"] = args.strategies.split(",")
    if args.workers is not None:
        payload["workers"] = args.workers
    if args.serial:
        payload["workers"] = 1
    if args.n_lags is not None:
        payload["n_lags"] = args.n_lags
    if args.train_fraction is not None:
        payload["train_fraction"] = args.train_fraction
    swarm_payload = dict(payload.get("swarm", {}))
    if args.swarm_size is not None:
        swarm_payload["swarm_size"] = args.swarm_size
    if args.max_iterations is not None:
        swarm_payload["max_iterations"] = args.max_iterations
    if args.stall_limit is not None:
        swarm_payload["stall_limit"] = args.stall_limit
    if swarm_payload:
        payload["swarm"] = swarm_payload
    if "data_path" not in payload or "output_dir" not in payload:
        print("run needs --data and --out (or a config providing them)", file=sys.stderr)
        return 1
    config = ExperimentConfig.from_dict(payload)
    result = run_experiment(config)
    ok = sum(1 for r in result.records if r["status"] == "ok")
    print(f"{ok}/{len(result.records)} cells succeeded; reports in {result.output_dir}")
    return result.exit_code


def _cmd_tune(args) -> int:
    series = log_transform(impute_missing(load_series(args.data)))
    dataset = make_supervised(series, args.n_lags, args.horizon)
    train_set, _ = chronological_split(dataset, args.train_fraction)
    seed = cell_seed(args.seed, args.model, args.strategy, args.horizon, args.repeat)
    swarm = SwarmConfig(
        swarm_size=args.swarm_size,
        max_iterations=args.max_iterations,
        stall_limit=args.stall_limit,
        seed=seed,
    )
    tuned = tune_and_train(train_set, args.model, args.strategy, swarm)
    save_pipeline(tuned, args.out)
    print(
        f"gbest fitness {tuned.fitness:.6g} after {tuned.generations} generations "
        f"({tuned.evaluations} evaluations); pipeline saved to {args.out}"
    )
    return 0


def _cmd_forecast(args) -> int:
    tuned = load_pipeline(args.pipeline)
    series = log_transform(impute_missing(load_series(args.data)))
    n_lags = tuned.pipeline.n_lags
    if len(series) < n_lags:
        print(f"series shorter than the pipeline's {n_lags} lags", file=sys.stderr)
        return 1
    buffer = series.rates[-n_lags:][::-1].copy()
    window = LagWindow(buffer, tuned.pipeline.feature_mask)
    log_prediction = tuned.pipeline.forecast(window)
    prediction = np.power(10.0, log_prediction)
    lines = ["lead_time,predicted"]
    lines += [f"{h + 1},{float(v)!r}" for h, v in enumerate(prediction)]
    text = "\n".join(lines) + "\n"
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
        print(f"wrote {tuned.pipeline.horizon} leads to {args.out}")
    else:
        sys.stdout.write(text)
    return 0


def _cmd_report(args) -> int:
    report_from_ledger(args.ledger, args.out)
    print(f"reports rebuilt in {args.out}")
    return 0


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    handlers = {
        "synth": _cmd_synth,
        "run": _cmd_run,
        "tune": _cmd_tune,
        "forecast": _cmd_forecast,
        "report": _cmd_report,
    }
    try:
        return handlers[args.verb](args)
    except (FlucastError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry()
