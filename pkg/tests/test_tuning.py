import numpy as np
import pytest

import flucast.tuning as tuning
from flucast.clpso import ModelConfig, SwarmConfig
from flucast.data import IliSeries, log_transform, make_supervised
from flucast.errors import InsufficientDataError, TrainingError
from flucast.models import train_mlp, train_msvr, train_svr
from flucast.strategies import StrategyKind
from flucast.tuning import (
    ModelKind,
    build_grid,
    fitness,
    geometric_sequence,
    make_codec,
    tune_and_train,
)
from flucast.util import derive_seed
from oracles import reference_iterated


class TestBuildGrid:
    def test_svr_c_list_endpoints_and_ratio(self):
        grid = build_grid(ModelKind.SVR, StrategyKind.ITERATED)
        c_values = grid.segment("C").values
        assert len(c_values) == 16
        assert c_values[0] == 1.0 and c_values[-1] == 100.0
        ratios = [b / a for a, b in zip(c_values, c_values[1:])]
        assert ratios[0] == pytest.approx(100.0 ** (1.0 / 15.0), rel=1e-12)
        assert ratios[0] == pytest.approx(1.35936, abs=5e-6)
        assert max(ratios) - min(ratios) < 1e-12

    def test_svr_epsilon_list(self):
        grid = build_grid("svr", "direct")
        eps = grid.segment("epsilon").values
        expected = [1e-4, 10.0 ** (-4 + 2 / 3), 10.0 ** (-4 + 4 / 3), 1e-2]
        np.testing.assert_allclose(eps, expected, rtol=1e-12)

    def test_svr_gamma_list(self):
        grid = build_grid("svr", "mimo")
        assert grid.segment("gamma").values == (0.05, 0.1, 0.2, 0.4)

    def test_mlp_grid(self):
        grid = build_grid("mlp", "mimo")
        assert len(grid.segments) == 1
        assert grid.segment("hidden_size").values == (10, 20, 50, 100)

    def test_geometric_sequence_formula(self):
        values = geometric_sequence(2.0, 32.0, 5)
        np.testing.assert_allclose(values, [2.0, 4.0, 8.0, 16.0, 32.0], rtol=1e-12)


class TestCodecSizes:
    def test_svr_particle_has_28_dimensions_at_d20(self):
        codec = make_codec(20, build_grid("svr", "iterated"))
        assert codec.total_bits == 28

    def test_mlp_particle_has_22_dimensions_at_d20(self):
        codec = make_codec(20, build_grid("mlp", "mimo"))
        assert codec.total_bits == 22

    def test_table_boundary_decodings(self):
        codec = make_codec(3, build_grid("svr", "iterated"))
        bits = np.zeros(codec.total_bits, dtype=np.int8)
        bits[0] = 1
        decoded = codec.decode(bits)
        assert decoded.parameters["C"] == 1.0  # segment bits 0000
        bits[3:7] = 1  # C segment all ones
        assert codec.decode(bits).parameters["C"] == 100.0


def series_from(rates):
    n = len(rates)
    return IliSeries(
        years=2010 + np.arange(n) // 52,
        weeks=(np.arange(n) % 52) + 1,
        rates=np.asarray(rates, dtype=float),
        missing=np.zeros(n, dtype=bool),
    )


def constant_train_set(n=18, d=3, horizon=2):
    series = series_from(np.full(n, 3.7))
    return make_supervised(log_transform(series), d, horizon)


def wavy_train_set(n=24, d=3, horizon=2, seed=0):
    rng = np.random.default_rng(seed)
    rates = 2.0 + np.sin(np.arange(n) / 3.0) + rng.normal(0, 0.05, n) + 1.5
    return make_supervised(log_transform(series_from(rates)), d, horizon)


def svr_config(d=3, C=2.6826957952797246, epsilon=1e-3, gamma=0.2, mask=None):
    grid = build_grid("svr", "iterated")
    if mask is None:
        mask = np.ones(d, dtype=bool)
    c_values = grid.segment("C").values
    nearest_c = min(c_values, key=lambda v: abs(v - C))
    eps_values = grid.segment("epsilon").values
    nearest_eps = min(eps_values, key=lambda v: abs(v - epsilon))
    return ModelConfig(
        feature_mask=mask,
        parameters={"C": nearest_c, "epsilon": nearest_eps, "gamma": gamma},
    )


def mlp_config(d=3, hidden=10, mask=None):
    if mask is None:
        mask = np.ones(d, dtype=bool)
    return ModelConfig(feature_mask=mask, parameters={"hidden_size": hidden})


ALL_COMBOS = [
    (ModelKind.SVR, StrategyKind.ITERATED),
    (ModelKind.SVR, StrategyKind.DIRECT),
    (ModelKind.SVR, StrategyKind.MIMO),
    (ModelKind.MLP, StrategyKind.ITERATED),
    (ModelKind.MLP, StrategyKind.DIRECT),
    (ModelKind.MLP, StrategyKind.MIMO),
]


class TestFitness:
    def test_constant_series_fits_any_config(self):
        train_set = constant_train_set()
        for model_kind, strategy in ALL_COMBOS:
            config = svr_config() if model_kind == ModelKind.SVR else mlp_config()
            value = fitness(config, train_set, model_kind, strategy, seed=1)
            assert value < 1e-8, (model_kind, strategy, value)

    def test_constant_series_with_partial_mask(self):
        train_set = constant_train_set()
        mask = np.array([False, True, False])
        value = fitness(svr_config(mask=mask), train_set, "svr", "iterated", seed=0)
        assert value < 1e-8

    def test_deterministic_given_seed(self):
        train_set = wavy_train_set()
        for model_kind, strategy in ALL_COMBOS:
            config = svr_config() if model_kind == ModelKind.SVR else mlp_config()
            a = fitness(config, train_set, model_kind, strategy, seed=9)
            b = fitness(config, train_set, model_kind, strategy, seed=9)
            assert a == b

    def test_matches_straight_line_reimplementation(self):
        train_set = wavy_train_set()
        seed = 4
        for model_kind, strategy in ALL_COMBOS:
            config = svr_config() if model_kind == ModelKind.SVR else mlp_config()
            got = fitness(config, train_set, model_kind, strategy, seed=seed)
            expected = reference_fitness(config, train_set, model_kind, strategy, seed)
            assert got == pytest.approx(expected, abs=1e-12), (model_kind, strategy)

    def test_too_few_samples_rejected(self):
        train_set = constant_train_set(n=8, d=3, horizon=2)  # 4 rows
        with pytest.raises(InsufficientDataError):
            fitness(svr_config(), train_set, "svr", "iterated", seed=0)

    def test_training_failure_becomes_infinite_sentinel(self, monkeypatch):
        def boom(*args, **kwargs):
            raise TrainingError("forced failure")

        monkeypatch.setattr(tuning, "train_svr", boom)
        train_set = wavy_train_set()
        with pytest.warns(RuntimeWarning, match="training failed"):
            value = fitness(svr_config(), train_set, "svr", "iterated", seed=0)
        assert value == float("inf")


def reference_fitness(config, train_set, model_kind, strategy, seed):
    """Loop folds and samples explicitly; average per-sample squared errors."""
    n = len(train_set)
    mask = config.feature_mask
    folds = np.array_split(np.arange(n), 5)
    errors = []
    for fold_id, val_rows in enumerate(folds):
        train_rows = np.array([i for i in range(n) if i not in set(val_rows.tolist())])
        X = train_set.inputs[train_rows][:, mask]
        Y = train_set.targets[train_rows]
        fold_seed = derive_seed(seed, "fold", fold_id)
        if model_kind == ModelKind.SVR:
            C = config.parameters["C"]
            eps = config.parameters["epsilon"]
            gamma = config.parameters["gamma"]
            if strategy == StrategyKind.ITERATED:
                models = [train_svr(X, Y[:, 0], C, eps, gamma)]
            elif strategy == StrategyKind.DIRECT:
                models = [train_svr(X, Y[:, h], C, eps, gamma) for h in range(Y.shape[1])]
            else:
                models = [train_msvr(X, Y, C, eps, gamma)]
        else:
            hidden = config.parameters["hidden_size"]
            if strategy == StrategyKind.ITERATED:
                models = [train_mlp(X, Y[:, :1], hidden, fold_seed)]
            elif strategy == StrategyKind.DIRECT:
                models = [
                    train_mlp(X, Y[:, h : h + 1], hidden, derive_seed(fold_seed, "lead", h))
                    for h in range(Y.shape[1])
                ]
            else:
                models = [train_mlp(X, Y, hidden, fold_seed)]
        for row in val_rows:
            buffer = train_set.inputs[row]
            target = train_set.targets[row]
            if strategy == StrategyKind.ITERATED:
                pred = reference_iterated(
                    lambda v: np.atleast_1d(models[0].predict(v))[0],
                    buffer,
                    mask,
                    train_set.horizon,
                )
            elif strategy == StrategyKind.DIRECT:
                pred = np.array(
                    [np.atleast_1d(m.predict(buffer[mask]))[0] for m in models]
                )
            else:
                pred = np.asarray(models[0].predict(buffer[mask]))
            errors.extend(((pred - target) ** 2).tolist())
    return float(np.mean(errors))


class TestTuneAndTrain:
    def swarm(self, seed=3):
        return SwarmConfig(swarm_size=4, max_iterations=3, stall_limit=3, seed=seed)

    def test_model_counts_per_strategy(self):
        train_set = wavy_train_set(n=30)
        tuned_iter = tune_and_train(train_set, "svr", "iterated", self.swarm())
        assert len(tuned_iter.pipeline.models) == 1
        tuned_dir = tune_and_train(train_set, "svr", "direct", self.swarm())
        assert len(tuned_dir.pipeline.models) == train_set.horizon
        tuned_mimo = tune_and_train(train_set, "mlp", "mimo", self.swarm())
        assert len(tuned_mimo.pipeline.models) == 1

    def test_models_carry_the_decoded_configuration(self):
        train_set = wavy_train_set(n=30)
        tuned = tune_and_train(train_set, "svr", "direct", self.swarm(seed=8))
        for model in tuned.pipeline.models:
            assert model.C == tuned.config.parameters["C"]
            assert model.epsilon == tuned.config.parameters["epsilon"]
            assert model.gamma == tuned.config.parameters["gamma"]
        np.testing.assert_array_equal(
            tuned.pipeline.feature_mask, tuned.config.feature_mask
        )

    def test_deterministic_given_seed(self):
        train_set = wavy_train_set(n=30)
        a = tune_and_train(train_set, "mlp", "iterated", self.swarm(seed=5))
        b = tune_and_train(train_set, "mlp", "iterated", self.swarm(seed=5))
        assert a.fitness == b.fitness
        np.testing.assert_array_equal(a.pipeline.feature_mask, b.pipeline.feature_mask)
        np.testing.assert_array_equal(
            a.pipeline.models[0].hidden_weights, b.pipeline.models[0].hidden_weights
        )

    def test_evaluation_budget_respected(self):
        train_set = wavy_train_set(n=30)
        swarm = self.swarm()
        tuned = tune_and_train(train_set, "svr", "iterated", swarm)
        assert tuned.evaluations <= swarm.swarm_size * swarm.max_iterations
