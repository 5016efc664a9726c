"""Multi-output SVR with a hyper-spherical epsilon-insensitive zone.

Trained by iteratively reweighted least squares: points whose joint residual
norm u_i exceeds epsilon receive weight 2C(u_i - epsilon)/u_i, the weighted
kernel system is solved for the coefficient matrix and biases, and a halving
line search guarantees the true objective never increases.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from ..errors import DimensionError, TrainingError
from .kernels import rbf_gram

MAX_IRWLS_ITERATIONS = 100
RELATIVE_OBJECTIVE_TOL = 1e-6


@dataclass
class MsvrModel:
    """Prediction for x is k(x, support_inputs) @ coefficient_matrix + biases."""

    support_inputs: np.ndarray
    coefficient_matrix: np.ndarray
    biases: np.ndarray
    gamma: float
    epsilon: float
    C: float
    converged: bool = field(default=True, compare=False)
    objective_trace: list = field(default_factory=list, repr=False, compare=False)

    @property
    def n_inputs(self) -> int:
        return self.support_inputs.shape[1]

    @property
    def n_outputs(self) -> int:
        return self.coefficient_matrix.shape[1]

    def predict(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        if x.ndim != 1 or x.shape[0] != self.n_inputs:
            raise DimensionError(
                f"expected input of dimension {self.n_inputs}, got shape {x.shape}"
            )
        k_row = rbf_gram(x[None, :], self.support_inputs, self.gamma)
        return (k_row @ self.coefficient_matrix)[0] + self.biases

    def predict_batch(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        if X.shape[1] != self.n_inputs:
            raise DimensionError(
                f"expected inputs of dimension {self.n_inputs}, got {X.shape[1]}"
            )
        return rbf_gram(X, self.support_inputs, self.gamma) @ self.coefficient_matrix + self.biases


def msvr_objective(K, targets, coefficients, biases, C, epsilon) -> float:
    """0.5 * sum_j B_j' K B_j + C * sum_i L(u_i) with L(u) = max(u - eps, 0)^2."""
    residual = targets - K @ coefficients - biases
    u = np.sqrt(np.sum(residual * residual, axis=1))
    excess = np.maximum(u - epsilon, 0.0)
    return float(0.5 * np.sum(coefficients * (K @ coefficients)) + C * np.sum(excess * excess))


def _solve_weighted_system(K, targets, weights, active, ridge):
    """Solve the bordered system for active coefficients and the bias row."""
    m = int(np.sum(active))
    idx = np.flatnonzero(active)
    system = np.zeros((m + 1, m + 1))
    system[:m, :m] = K[np.ix_(idx, idx)] + np.diag(1.0 / weights[idx])
    system[:m, m] = 1.0
    system[m, :m] = 1.0
    if ridge > 0.0:
        system[:m, :m] += ridge * np.eye(m)
    rhs = np.vstack([targets[idx], np.zeros((1, targets.shape[1]))])
    solution = np.linalg.solve(system, rhs)
    if not np.all(np.isfinite(solution)):
        raise np.linalg.LinAlgError("non-finite solution")
    coefficients = np.zeros_like(targets)
    coefficients[idx] = solution[:m]
    return coefficients, solution[m]


def train_msvr(
    inputs,
    targets,
    C: float,
    epsilon: float,
    gamma: float,
    max_iterations: int = MAX_IRWLS_ITERATIONS,
    rel_tol: float = RELATIVE_OBJECTIVE_TOL,
) -> MsvrModel:
    """Fit the multi-output regressor by IRWLS with a monotone line search."""
    X = np.atleast_2d(np.asarray(inputs, dtype=np.float64))
    Y = np.asarray(targets, dtype=np.float64)
    if Y.ndim == 1:
        Y = Y[:, None]
    if X.shape[0] != Y.shape[0]:
        raise DimensionError("inputs and targets disagree on sample count")
    if not (np.all(np.isfinite(X)) and np.all(np.isfinite(Y))):
        raise TrainingError("non-finite values in MSVR training data")
    if C <= 0.0 or epsilon < 0.0 or gamma <= 0.0:
        raise ValueError("require C > 0, epsilon >= 0, gamma > 0")

    n = X.shape[0]
    K = rbf_gram(X, X, gamma)
    coefficients = np.zeros_like(Y)
    biases = Y.mean(axis=0)
    objective = msvr_objective(K, Y, coefficients, biases, C, epsilon)
    trace = [objective]
    converged = False

    for _ in range(max_iterations):
        residual = Y - K @ coefficients - biases
        u = np.sqrt(np.sum(residual * residual, axis=1))
        active = u > epsilon
        if not np.any(active):
            converged = True
            break
        weights = np.zeros(n)
        weights[active] = 2.0 * C * (u[active] - epsilon) / u[active]
        try:
            new_coeff, new_biases = _solve_weighted_system(K, Y, weights, active, 0.0)
        except np.linalg.LinAlgError:
            # Gram matrices of duplicate inputs are singular; retry once.
            ridge = 1e-8 * np.trace(K) / n
            try:
                new_coeff, new_biases = _solve_weighted_system(K, Y, weights, active, ridge)
            except np.linalg.LinAlgError as exc:
                raise TrainingError(f"weighted system unsolvable: {exc}") from exc

        # halving line search toward the IRWLS solution
        eta = 1.0
        accepted = False
        while eta > 1e-12:
            cand_coeff = (1.0 - eta) * coefficients + eta * new_coeff
            cand_biases = (1.0 - eta) * biases + eta * new_biases
            cand_objective = msvr_objective(K, Y, cand_coeff, cand_biases, C, epsilon)
            if cand_objective < objective:
                accepted = True
                break
            eta *= 0.5
        if not accepted:
            converged = True
            break
        relative_drop = (objective - cand_objective) / max(objective, 1e-300)
        coefficients, biases, objective = cand_coeff, cand_biases, cand_objective
        trace.append(objective)
        if relative_drop < rel_tol:
            converged = True
            break

    if not converged:
        warnings.warn(
            "MSVR IRWLS did not converge; returning best iterate", RuntimeWarning
        )
    return MsvrModel(
        support_inputs=X.copy(),
        coefficient_matrix=coefficients,
        biases=np.asarray(biases, dtype=np.float64),
        gamma=float(gamma),
        epsilon=float(epsilon),
        C=float(C),
        converged=converged,
        objective_trace=trace,
    )


def predict_msvr(model: MsvrModel, x) -> np.ndarray:
    """Multi-output prediction for one input vector."""
    return model.predict(x)
