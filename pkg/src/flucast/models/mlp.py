"""Single-hidden-layer perceptron with ReLU units, trained by full-batch Adam."""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from ..errors import DimensionError, TrainingError

ADAM_STEP = 1e-3
ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPSILON = 1e-8
DEFAULT_EPOCHS = 200


@dataclass
class MlpModel:
    """Forward pass: output_weights @ relu(hidden_weights @ x + hidden_biases) + output_biases."""

    hidden_weights: np.ndarray
    hidden_biases: np.ndarray
    output_weights: np.ndarray
    output_biases: np.ndarray
    hidden_size: int

    @property
    def n_inputs(self) -> int:
        return self.hidden_weights.shape[1]

    @property
    def n_outputs(self) -> int:
        return self.output_weights.shape[0]

    def predict(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        if x.ndim != 1 or x.shape[0] != self.n_inputs:
            raise DimensionError(
                f"expected input of dimension {self.n_inputs}, got shape {x.shape}"
            )
        hidden = np.maximum(self.hidden_weights @ x + self.hidden_biases, 0.0)
        return self.output_weights @ hidden + self.output_biases

    def predict_batch(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        if X.shape[1] != self.n_inputs:
            raise DimensionError(
                f"expected inputs of dimension {self.n_inputs}, got {X.shape[1]}"
            )
        hidden = np.maximum(X @ self.hidden_weights.T + self.hidden_biases, 0.0)
        return hidden @ self.output_weights.T + self.output_biases

    def copy(self) -> "MlpModel":
        return MlpModel(
            self.hidden_weights.copy(),
            self.hidden_biases.copy(),
            self.output_weights.copy(),
            self.output_biases.copy(),
            self.hidden_size,
        )


class MlpGradients(NamedTuple):
    hidden_weights: np.ndarray
    hidden_biases: np.ndarray
    output_weights: np.ndarray
    output_biases: np.ndarray


def init_mlp(
    n_inputs: int, hidden_size: int, n_outputs: int, rng, target_means=None
) -> MlpModel:
    """Glorot-uniform hidden weights; output layer starts at the best constant.

    With zero output weights and the target column means as output biases the
    network's initial prediction is the mean predictor, so a constant-target
    problem is already at its global minimum and training leaves it there.
    Hidden weights are random to break symmetry; the output layer picks up
    nonzero gradients from the first loss-bearing epoch.
    """
    limit_hidden = np.sqrt(6.0 / (n_inputs + hidden_size))
    hidden_weights = rng.uniform(-limit_hidden, limit_hidden, size=(hidden_size, n_inputs))
    if target_means is None:
        output_biases = np.zeros(n_outputs)
    else:
        output_biases = np.asarray(target_means, dtype=np.float64).copy()
    return MlpModel(
        hidden_weights=hidden_weights,
        hidden_biases=np.zeros(hidden_size),
        output_weights=np.zeros((n_outputs, hidden_size)),
        output_biases=output_biases,
        hidden_size=hidden_size,
    )


def loss_and_gradients(model: MlpModel, inputs, targets) -> tuple[float, MlpGradients]:
    """Mean squared error over all (sample, output) entries and its gradients."""
    X = np.atleast_2d(np.asarray(inputs, dtype=np.float64))
    Y = np.asarray(targets, dtype=np.float64)
    if Y.ndim == 1:
        Y = Y[:, None]
    n = X.shape[0]
    pre = X @ model.hidden_weights.T + model.hidden_biases
    hidden = np.maximum(pre, 0.0)
    pred = hidden @ model.output_weights.T + model.output_biases
    diff = pred - Y
    loss = float(np.mean(diff * diff))
    scale = 2.0 / diff.size
    d_pred = scale * diff
    d_output_weights = d_pred.T @ hidden
    d_output_biases = d_pred.sum(axis=0)
    d_hidden = d_pred @ model.output_weights
    d_hidden[pre <= 0.0] = 0.0
    d_hidden_weights = d_hidden.T @ X
    d_hidden_biases = d_hidden.sum(axis=0)
    return loss, MlpGradients(d_hidden_weights, d_hidden_biases, d_output_weights, d_output_biases)


def train_mlp(
    inputs,
    targets,
    hidden_size: int,
    seed: int,
    epochs: int = DEFAULT_EPOCHS,
    learning_rate: float = ADAM_STEP,
    init: MlpModel | None = None,
) -> MlpModel:
    """Full-batch Adam on the MSE loss; deterministic given the seed."""
    X = np.atleast_2d(np.asarray(inputs, dtype=np.float64))
    Y = np.asarray(targets, dtype=np.float64)
    if Y.ndim == 1:
        Y = Y[:, None]
    if X.shape[0] != Y.shape[0]:
        raise DimensionError("inputs and targets disagree on sample count")
    if X.shape[0] < 1 or hidden_size < 1:
        raise ValueError("need at least one sample and one hidden unit")
    if not (np.all(np.isfinite(X)) and np.all(np.isfinite(Y))):
        raise TrainingError("non-finite values in MLP training data")

    if init is None:
        rng = np.random.default_rng(seed)
        model = init_mlp(X.shape[1], hidden_size, Y.shape[1], rng, Y.mean(axis=0))
    else:
        model = init.copy()

    params = [
        model.hidden_weights,
        model.hidden_biases,
        model.output_weights,
        model.output_biases,
    ]
    moment1 = [np.zeros_like(p) for p in params]
    moment2 = [np.zeros_like(p) for p in params]
    for step in range(1, epochs + 1):
        loss, grads = loss_and_gradients(model, X, Y)
        if not np.isfinite(loss):
            raise TrainingError(f"non-finite loss at epoch {step}")
        correction1 = 1.0 - ADAM_BETA1**step
        correction2 = 1.0 - ADAM_BETA2**step
        for p, m, v, g in zip(params, moment1, moment2, grads):
            m *= ADAM_BETA1
            m += (1.0 - ADAM_BETA1) * g
            v *= ADAM_BETA2
            v += (1.0 - ADAM_BETA2) * (g * g)
            p -= learning_rate * (m / correction1) / (np.sqrt(v / correction2) + ADAM_EPSILON)
    return model


def predict_mlp(model: MlpModel, x) -> np.ndarray:
    """Forward pass for one input vector."""
    return model.predict(x)
