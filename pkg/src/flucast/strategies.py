"""Multi-step forecasting strategies: iterated, direct, and MIMO.

A strategy drives trained regressors over a lag window. The window always
holds all n_lags most recent values ordered most-recent-first; the feature
mask is applied to that buffer each time a model is invoked, so the iterated
recursion shifts the full buffer and re-masks at every step.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from enum import Enum
from pathlib import Path

import numpy as np

from .data import IliSeries, SupervisedDataset
from .errors import DimensionError


class StrategyKind(str, Enum):
    ITERATED = "iterated"
    DIRECT = "direct"
    MIMO = "mimo"


@dataclass(frozen=True)
class LagWindow:
    """The n_lags most recent values [I_t, I_{t-1}, ...] plus a feature mask."""

    buffer: np.ndarray
    feature_mask: np.ndarray

    def __post_init__(self):
        buffer = np.asarray(self.buffer, dtype=np.float64)
        mask = np.asarray(self.feature_mask, dtype=bool)
        if buffer.ndim != 1 or mask.shape != buffer.shape:
            raise DimensionError("buffer and feature_mask must be equal-length vectors")
        object.__setattr__(self, "buffer", buffer)
        object.__setattr__(self, "feature_mask", mask)

    @property
    def n_lags(self) -> int:
        return len(self.buffer)

    def masked(self) -> np.ndarray:
        """Selected lags in buffer order."""
        return self.buffer[self.feature_mask]


def _scalar_prediction(model, x) -> float:
    value = np.asarray(model.predict(x), dtype=np.float64)
    if value.size != 1:
        raise DimensionError("iterated and direct strategies need single-output models")
    return float(value.reshape(-1)[0])


def forecast_iterated(model, window: LagWindow, horizon: int) -> np.ndarray:
    """Feed one-step predictions back through the shifted full lag buffer."""
    if horizon < 1:
        raise ValueError("horizon must be at least 1")
    buffer = window.buffer.copy()
    mask = window.feature_mask
    out = np.empty(horizon)
    for step in range(horizon):
        value = _scalar_prediction(model, buffer[mask])
        out[step] = value
        buffer[1:] = buffer[:-1]
        buffer[0] = value
    return out


def forecast_direct(models, window: LagWindow) -> np.ndarray:
    """One independently trained single-output model per lead time."""
    models = list(models)
    if not models:
        raise ValueError("direct strategy needs at least one model")
    x = window.masked()
    return np.array([_scalar_prediction(m, x) for m in models])


def forecast_mimo(model, window: LagWindow) -> np.ndarray:
    """Whole horizon in one shot from a multi-output model."""
    out = np.asarray(model.predict(window.masked()), dtype=np.float64).reshape(-1)
    return out


@dataclass(frozen=True)
class ForecastPipeline:
    """A strategy bundled with its trained model(s) and feature mask.

    Direct carries ``horizon`` models; iterated and MIMO carry exactly one.
    """

    kind: StrategyKind
    models: tuple
    feature_mask: np.ndarray
    n_lags: int
    horizon: int

    def __post_init__(self):
        mask = np.asarray(self.feature_mask, dtype=bool)
        if mask.shape != (self.n_lags,):
            raise DimensionError("feature mask length must equal n_lags")
        object.__setattr__(self, "feature_mask", mask)
        object.__setattr__(self, "models", tuple(self.models))
        expected = self.horizon if self.kind == StrategyKind.DIRECT else 1
        if len(self.models) != expected:
            raise ValueError(
                f"{self.kind.value} strategy expects {expected} model(s), "
                f"got {len(self.models)}"
            )

    def forecast(self, window: LagWindow) -> np.ndarray:
        if self.kind == StrategyKind.ITERATED:
            return forecast_iterated(self.models[0], window, self.horizon)
        if self.kind == StrategyKind.DIRECT:
            return forecast_direct(self.models, window)
        out = forecast_mimo(self.models[0], window)
        if out.shape != (self.horizon,):
            raise DimensionError(
                f"multi-output model returned {out.shape}, expected ({self.horizon},)"
            )
        return out


class PersistenceModel:
    """Baseline predictor: repeats the most recent selected lag."""

    def predict(self, x) -> float:
        x = np.asarray(x, dtype=np.float64)
        if x.size < 1:
            raise DimensionError("persistence needs at least one selected lag")
        return float(x.reshape(-1)[0])


def persistence_pipeline(n_lags: int, horizon: int) -> ForecastPipeline:
    """Iterated persistence baseline over the full lag window."""
    return ForecastPipeline(
        kind=StrategyKind.ITERATED,
        models=(PersistenceModel(),),
        feature_mask=np.ones(n_lags, dtype=bool),
        n_lags=n_lags,
        horizon=horizon,
    )


@dataclass(frozen=True)
class ForecastTable:
    """Original-scale predictions and observations per (origin, lead time)."""

    origin_index: np.ndarray
    horizon: int
    predicted: np.ndarray
    observed: np.ndarray

    def __len__(self) -> int:
        return len(self.origin_index)

    @property
    def n_cells(self) -> int:
        return len(self.origin_index) * self.horizon

    def cell(self, origin_index: int, lead_time: int) -> tuple[float, float]:
        """(predicted, observed) for a given origin and lead time in 1..H."""
        rows = np.flatnonzero(self.origin_index == origin_index)
        if len(rows) != 1 or not 1 <= lead_time <= self.horizon:
            raise KeyError((origin_index, lead_time))
        row = rows[0]
        return float(self.predicted[row, lead_time - 1]), float(self.observed[row, lead_time - 1])


def rollout(pipeline: ForecastPipeline, test_set: SupervisedDataset) -> ForecastTable:
    """Forecast every test row in log space, then invert to the original scale."""
    if test_set.n_lags != pipeline.n_lags or test_set.horizon != pipeline.horizon:
        raise DimensionError(
            f"pipeline built for n_lags={pipeline.n_lags}, horizon={pipeline.horizon} "
            f"but test set has n_lags={test_set.n_lags}, horizon={test_set.horizon}"
        )
    n = len(test_set)
    predictions = np.empty((n, pipeline.horizon))
    for i in range(n):
        window = LagWindow(test_set.inputs[i], pipeline.feature_mask)
        predictions[i] = pipeline.forecast(window)
    return ForecastTable(
        origin_index=test_set.origin_index.copy(),
        horizon=pipeline.horizon,
        predicted=np.power(10.0, predictions),
        observed=np.power(10.0, test_set.targets),
    )


def write_forecast_csv(table: ForecastTable, series: IliSeries, path) -> None:
    """Long-format export: origin_year, origin_week, lead_time, predicted, observed."""
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["origin_year", "origin_week", "lead_time", "predicted", "observed"])
        for row, origin in enumerate(table.origin_index):
            for lead in range(1, table.horizon + 1):
                writer.writerow(
                    [
                        int(series.years[origin]),
                        int(series.weeks[origin]),
                        lead,
                        repr(float(table.predicted[row, lead - 1])),
                        repr(float(table.observed[row, lead - 1])),
                    ]
                )
