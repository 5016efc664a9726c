"""Joint feature-selection and hyperparameter search for forecasting pipelines.

A particle encodes one configuration shared by every sub-model of a strategy.
Fitness is the mean squared error of blocked 5-fold cross-validation on the
training set, computed in log space over all lead times, so it matches the
scale the models are fitted on. The winning configuration is retrained on the
full training set.
"""

from __future__ import annotations

import time
import warnings
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .clpso import (
    ClpsoResult,
    GridSegment,
    ModelConfig,
    ParticleCodec,
    SwarmConfig,
    run_clpso,
)
from .data import SupervisedDataset
from .errors import InsufficientDataError, TrainingError
from .models import train_mlp, train_msvr, train_svr
from .strategies import ForecastPipeline, LagWindow, StrategyKind
from .util import derive_seed

CV_FOLDS = 5


class ModelKind(str, Enum):
    SVR = "svr"
    MLP = "mlp"


@dataclass(frozen=True)
class CandidateGrid:
    """Ordered candidate lists for every tunable parameter of a model kind."""

    model_kind: ModelKind
    strategy_kind: StrategyKind
    segments: tuple

    def segment(self, name: str) -> GridSegment:
        for seg in self.segments:
            if seg.name == name:
                return seg
        raise KeyError(name)


def geometric_sequence(start: float, end: float, count: int) -> tuple:
    """count values g_i = start * (end/start)**(i/(count-1)), endpoints exact."""
    if count < 2:
        raise ValueError("need at least two points")
    ratio = end / start
    values = [start * ratio ** (i / (count - 1)) for i in range(count)]
    values[0], values[-1] = float(start), float(end)
    return tuple(values)


def build_grid(model_kind: ModelKind, strategy_kind: StrategyKind) -> CandidateGrid:
    """Published search spaces: SVR tunes C, epsilon, gamma; MLP its width."""
    model_kind = ModelKind(model_kind)
    strategy_kind = StrategyKind(strategy_kind)
    if model_kind == ModelKind.SVR:
        segments = (
            GridSegment("C", geometric_sequence(1.0, 100.0, 16)),
            GridSegment("epsilon", geometric_sequence(1e-4, 1e-2, 4)),
            GridSegment("gamma", (0.05, 0.1, 0.2, 0.4)),
        )
    else:
        segments = (GridSegment("hidden_size", (10, 20, 50, 100)),)
    return CandidateGrid(model_kind, strategy_kind, segments)


def make_codec(n_lags: int, grid: CandidateGrid) -> ParticleCodec:
    return ParticleCodec(n_lags=n_lags, segments=grid.segments)


def _train_bundle(
    model_kind: ModelKind,
    strategy_kind: StrategyKind,
    inputs_masked: np.ndarray,
    targets: np.ndarray,
    config: ModelConfig,
    seed: int,
) -> tuple:
    """Train the model multiset a strategy needs, on already-masked inputs."""
    horizon = targets.shape[1]
    if model_kind == ModelKind.SVR:
        C = float(config.parameters["C"])
        epsilon = float(config.parameters["epsilon"])
        gamma = float(config.parameters["gamma"])
        if strategy_kind == StrategyKind.ITERATED:
            return (train_svr(inputs_masked, targets[:, 0], C, epsilon, gamma),)
        if strategy_kind == StrategyKind.DIRECT:
            return tuple(
                train_svr(inputs_masked, targets[:, h], C, epsilon, gamma)
                for h in range(horizon)
            )
        return (train_msvr(inputs_masked, targets, C, epsilon, gamma),)
    hidden = int(config.parameters["hidden_size"])
    if strategy_kind == StrategyKind.ITERATED:
        return (train_mlp(inputs_masked, targets[:, :1], hidden, seed),)
    if strategy_kind == StrategyKind.DIRECT:
        return tuple(
            train_mlp(inputs_masked, targets[:, h : h + 1], hidden, derive_seed(seed, "lead", h))
            for h in range(horizon)
        )
    return (train_mlp(inputs_masked, targets, hidden, seed),)


def _blocked_folds(n: int, folds: int) -> list:
    return [fold for fold in np.array_split(np.arange(n), folds)]


def fitness(
    config: ModelConfig,
    train_set: SupervisedDataset,
    model_kind: ModelKind,
    strategy_kind: StrategyKind,
    seed: int,
    folds: int = CV_FOLDS,
) -> float:
    """Blocked cross-validated MSE of one configuration, in log space.

    Folds are chronologically contiguous and unshuffled; each fold is held out
    once while the remaining rows train the strategy's model(s). Squared
    errors accumulate over every lead time. Training failures return +inf so
    the swarm routes around them.
    """
    model_kind = ModelKind(model_kind)
    strategy_kind = StrategyKind(strategy_kind)
    n = len(train_set)
    if n < folds:
        raise InsufficientDataError(f"{n} samples cannot form {folds} folds")
    mask = config.feature_mask
    if len(mask) != train_set.n_lags:
        raise ValueError("feature mask length does not match dataset n_lags")
    horizon = train_set.horizon
    total_squared_error = 0.0
    total_count = 0
    for fold_id, validation_rows in enumerate(_blocked_folds(n, folds)):
        train_rows = np.setdiff1d(np.arange(n), validation_rows, assume_unique=True)
        inputs_masked = train_set.inputs[train_rows][:, mask]
        targets = train_set.targets[train_rows]
        try:
            models = _train_bundle(
                model_kind,
                strategy_kind,
                inputs_masked,
                targets,
                config,
                derive_seed(seed, "fold", fold_id),
            )
        except TrainingError as exc:
            warnings.warn(f"fold {fold_id} training failed: {exc}", RuntimeWarning)
            return float("inf")
        pipeline = ForecastPipeline(
            kind=strategy_kind,
            models=models,
            feature_mask=mask,
            n_lags=train_set.n_lags,
            horizon=horizon,
        )
        for row in validation_rows:
            window = LagWindow(train_set.inputs[row], mask)
            prediction = pipeline.forecast(window)
            residual = prediction - train_set.targets[row]
            total_squared_error += float(residual @ residual)
            total_count += horizon
    return total_squared_error / total_count


@dataclass
class TrainedPipeline:
    """Tuning outcome: the retrained pipeline plus its search metadata."""

    pipeline: ForecastPipeline
    config: ModelConfig
    model_kind: ModelKind
    fitness: float
    generations: int
    evaluations: int
    wall_time: float
    gbest_bits: str = ""

    @property
    def horizon(self) -> int:
        return self.pipeline.horizon


def tune_and_train(
    train_set: SupervisedDataset,
    model_kind: ModelKind,
    strategy_kind: StrategyKind,
    swarm_config: SwarmConfig,
) -> TrainedPipeline:
    """Run the swarm over mask+hyperparameter bits, then retrain the winner.

    Fitness values are cached per decoded configuration, which only reduces
    the evaluation count below the swarm_size * max_iterations bound.
    """
    model_kind = ModelKind(model_kind)
    strategy_kind = StrategyKind(strategy_kind)
    grid = build_grid(model_kind, strategy_kind)
    codec = make_codec(train_set.n_lags, grid)
    cache: dict = {}

    def bit_fitness(bits) -> float:
        config = codec.decode(bits)
        key = config.key()
        if key not in cache:
            cache[key] = fitness(
                config, train_set, model_kind, strategy_kind, swarm_config.seed
            )
        return cache[key]

    start = time.perf_counter()
    result: ClpsoResult = run_clpso(bit_fitness, codec.total_bits, swarm_config)
    best_config = codec.decode(result.best_position)
    models = _train_bundle(
        model_kind,
        strategy_kind,
        train_set.inputs[:, best_config.feature_mask],
        train_set.targets,
        best_config,
        derive_seed(swarm_config.seed, "retrain"),
    )
    elapsed = time.perf_counter() - start
    pipeline = ForecastPipeline(
        kind=strategy_kind,
        models=models,
        feature_mask=best_config.feature_mask,
        n_lags=train_set.n_lags,
        horizon=train_set.horizon,
    )
    return TrainedPipeline(
        pipeline=pipeline,
        config=best_config,
        model_kind=model_kind,
        fitness=result.best_fitness,
        generations=result.generations,
        evaluations=result.evaluations,
        wall_time=elapsed,
        gbest_bits="".join(str(int(b)) for b in result.best_position),
    )
