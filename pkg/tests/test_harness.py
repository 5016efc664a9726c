import datetime
import json

import numpy as np
import pytest

from flucast.cli import main
from flucast.clpso import SwarmConfig
from flucast.data import load_series, write_series_csv
from flucast.errors import ConfigError
from flucast.harness import (
    ExperimentConfig,
    cell_seed,
    combo_label,
    generate_synthetic_ili,
    load_pipeline,
    pipeline_from_dict,
    pipeline_to_dict,
    read_ledger,
    report_from_ledger,
    run_experiment,
    weeks_in_year,
)
from flucast.strategies import StrategyKind
from flucast.tuning import tune_and_train
from flucast.data import chronological_split, log_transform, make_supervised


class TestSyntheticGenerator:
    def test_length_matches_iso_calendar(self):
        series = generate_synthetic_ili(10, seed=0)
        expected = sum(weeks_in_year(y) for y in range(2011, 2021))
        assert len(series) == expected == 522

    def test_all_rates_positive(self):
        for seed in range(5):
            series = generate_synthetic_ili(4, seed=seed)
            assert np.all(series.rates > 0.0)

    def test_deterministic(self):
        a = generate_synthetic_ili(5, seed=3)
        b = generate_synthetic_ili(5, seed=3)
        np.testing.assert_array_equal(a.rates, b.rates)

    def test_yearly_peak_lands_in_winter_window(self):
        hits = 0
        for seed in range(10):
            series = generate_synthetic_ili(6, seed=seed)
            in_window = 0
            years = np.unique(series.years)
            for year in years:
                sel = series.years == year
                peak_week = int(series.weeks[sel][np.argmax(series.rates[sel])])
                if peak_week >= 45 or peak_week <= 8:
                    in_window += 1
            if in_window == len(years):
                hits += 1
        assert hits >= 9

    def test_csv_round_trip(self, tmp_path):
        series = generate_synthetic_ili(3, seed=1)
        path = tmp_path / "synth.csv"
        write_series_csv(series, path)
        back = load_series(path)
        np.testing.assert_array_equal(back.rates, series.rates)
        np.testing.assert_array_equal(back.weeks, series.weeks)

    def test_too_few_years_rejected(self):
        with pytest.raises(ValueError):
            generate_synthetic_ili(1, seed=0)


class TestSeeding:
    def test_cell_seed_is_stable_across_calls(self):
        a = cell_seed(7, "svr", "mimo", 4, 3)
        b = cell_seed(7, "svr", "mimo", 4, 3)
        assert a == b

    def test_cell_seed_distinguishes_every_field(self):
        base = cell_seed(7, "svr", "mimo", 4, 3)
        assert cell_seed(8, "svr", "mimo", 4, 3) != base
        assert cell_seed(7, "mlp", "mimo", 4, 3) != base
        assert cell_seed(7, "svr", "direct", 4, 3) != base
        assert cell_seed(7, "svr", "mimo", 5, 3) != base
        assert cell_seed(7, "svr", "mimo", 4, 2) != base


class TestPipelinePersistence:
    def test_round_trip(self, tmp_path):
        series = generate_synthetic_ili(3, seed=5)
        dataset = make_supervised(log_transform(series), 4, 2)
        train_set, test_set = chronological_split(dataset, 2 / 3)
        tuned = tune_and_train(
            train_set, "svr", "mimo",
            SwarmConfig(swarm_size=4, max_iterations=2, stall_limit=2, seed=11),
        )
        clone = pipeline_from_dict(pipeline_to_dict(tuned))
        assert clone.pipeline.kind == StrategyKind.MIMO
        assert clone.gbest_bits == tuned.gbest_bits
        assert len(tuned.gbest_bits) == 4 + 8  # mask bits + SVR parameter bits
        from flucast.strategies import rollout

        a = rollout(tuned.pipeline, test_set)
        b = rollout(clone.pipeline, test_set)
        np.testing.assert_array_equal(a.predicted, b.predicted)


def small_config(tmp_path, workers=1, seed=0):
    data = tmp_path / "data.csv"
    if not data.exists():
        write_series_csv(generate_synthetic_ili(4, seed=9), data)
    return ExperimentConfig(
        data_path=str(data),
        output_dir=str(tmp_path / f"out_w{workers}_s{seed}"),
        horizons=(2,),
        models=("svr",),
        strategies=("iterated", "mimo"),
        repeats=2,
        base_seed=seed,
        n_lags=4,
        swarm=SwarmConfig(swarm_size=4, max_iterations=2, stall_limit=2),
        workers=workers,
    )


class TestRunExperiment:
    def test_small_run_produces_all_reports(self, tmp_path):
        config = small_config(tmp_path)
        result = run_experiment(config)
        assert result.exit_code == 0
        out = result.output_dir
        for metric in ("MAPE", "RMSE", "PWE", "OutbreakMAE"):
            table = (out / f"metrics_{metric}.csv").read_text().splitlines()
            assert table[0] == "combo,h=2"
            assert table[1].startswith("SVR-Iter,")
            assert table[2].startswith("SVR-MIMO,")
            assert table[3].startswith("best,")
            curves = (out / f"curves_{metric}.csv").read_text().splitlines()
            assert len(curves) == 1 + 2  # header + 2 combos x 1 horizon
            assert (out / f"significance_h2_{metric}.json").exists()
        ledger = read_ledger(out / "ledger.jsonl")
        assert len(ledger) == 2 * 1 * 2  # combos x horizons x repeats
        assert all(row["status"] == "ok" for row in ledger)
        pipelines = sorted((out / "pipelines").iterdir())
        assert len(pipelines) == 4
        loaded = load_pipeline(pipelines[0])
        assert loaded.pipeline.horizon == 2

    def test_significance_payload_shape(self, tmp_path):
        config = small_config(tmp_path)
        result = run_experiment(config)
        payload = json.loads(
            (result.output_dir / "significance_h2_RMSE.json").read_text()
        )
        assert payload["treatments"] == [combo_label("svr", "iterated"), combo_label("svr", "mimo")]
        assert 0.0 <= payload["p_value"] <= 1.0
        assert "critical_difference" in payload

    def test_report_verb_rebuilds_identical_tables(self, tmp_path):
        config = small_config(tmp_path)
        result = run_experiment(config)
        rebuilt_dir = tmp_path / "rebuilt"
        report_from_ledger(result.output_dir / "ledger.jsonl", rebuilt_dir)
        for metric in ("MAPE", "RMSE", "PWE", "OutbreakMAE"):
            original = (result.output_dir / f"metrics_{metric}.csv").read_bytes()
            rebuilt = (rebuilt_dir / f"metrics_{metric}.csv").read_bytes()
            assert original == rebuilt

    def test_empty_ledger_rejected(self, tmp_path):
        path = tmp_path / "ledger.jsonl"
        path.write_text("")
        with pytest.raises(ConfigError):
            report_from_ledger(path, tmp_path / "out")

    def test_missing_data_is_config_error(self, tmp_path):
        config = ExperimentConfig(
            data_path=str(tmp_path / "nope.csv"),
            output_dir=str(tmp_path / "out"),
            horizons=(2,),
            repeats=1,
        )
        with pytest.raises(ConfigError):
            run_experiment(config)

    def test_config_round_trip(self, tmp_path):
        config = small_config(tmp_path)
        clone = ExperimentConfig.from_dict(config.to_dict())
        assert clone.config_hash() == config.config_hash()
        assert clone.horizons == config.horizons

    def test_unknown_config_key_rejected(self):
        with pytest.raises(ConfigError):
            ExperimentConfig.from_dict({"data_path": "x", "output_dir": "y", "bogus": 1})


class TestCli:
    def test_synth_writes_loadable_csv(self, tmp_path):
        out = tmp_path / "series.csv"
        assert main(["synth", "--years", "3", "--seed", "2", "--out", str(out)]) == 0
        series = load_series(out)
        assert len(series) > 150

    def test_run_tune_forecast_report_flow(self, tmp_path):
        data = tmp_path / "data.csv"
        main(["synth", "--years", "4", "--seed", "9", "--out", str(data)])

        out_dir = tmp_path / "run_out"
        code = main(
            [
                "run", "--data", str(data), "--out", str(out_dir),
                "--horizons", "2", "--repeats", "1", "--models", "svr",
                "--strategies", "iterated", "--n-lags", "4",
                "--swarm-size", "4", "--max-iterations", "2", "--stall-limit", "2",
                "--serial",
            ]
        )
        assert code == 0
        assert (out_dir / "metrics_RMSE.csv").exists()

        pipeline_path = tmp_path / "pipe.json"
        code = main(
            [
                "tune", "--data", str(data), "--model", "svr", "--strategy", "mimo",
                "--horizon", "3", "--n-lags", "4", "--swarm-size", "4",
                "--max-iterations", "2", "--stall-limit", "2",
                "--out", str(pipeline_path),
            ]
        )
        assert code == 0

        forecast_path = tmp_path / "forecast.csv"
        code = main(
            ["forecast", "--pipeline", str(pipeline_path), "--data", str(data),
             "--out", str(forecast_path)]
        )
        assert code == 0
        lines = forecast_path.read_text().splitlines()
        assert lines[0] == "lead_time,predicted"
        assert len(lines) == 4  # header + 3 leads

        report_dir = tmp_path / "rebuilt"
        code = main(
            ["report", "--ledger", str(out_dir / "ledger.jsonl"), "--out", str(report_dir)]
        )
        assert code == 0
        assert (report_dir / "metrics_MAPE.csv").exists()

    def test_missing_data_file_returns_one(self, tmp_path):
        code = main(
            ["run", "--data", str(tmp_path / "absent.csv"), "--out", str(tmp_path / "o")]
        )
        assert code == 1

    def test_run_without_required_paths_returns_one(self):
        assert main(["run"]) == 1
