"""Epsilon-insensitive support vector regression trained by SMO.

The dual is solved in the 2n-variable form (upper and lower tube multipliers)
with maximal-violating-pair working-set selection. The hot loop is jitted with
numba; results are deterministic.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numba import njit

from ..errors import DimensionError, TrainingError
from .kernels import rbf_gram

DEFAULT_KKT_TOL = 1e-3


@njit(cache=True)
def _smo(K, y, C, epsilon, tol, max_updates):  # pragma: no cover - jitted
    """Pairwise coordinate optimisation of the 2n-variable SVR dual.

    Variables a[0:n] are the upper-tube multipliers (sign +1), a[n:2n] the
    lower-tube multipliers (sign -1). The first index comes from maximal
    violation, the second from the second-order gain rule, which keeps the
    update count nearly independent of C. Returns the multipliers, the bias,
    and the final maximal KKT violation.
    """
    n = y.shape[0]
    two_n = 2 * n
    a = np.zeros(two_n)
    grad = np.empty(two_n)
    for t in range(n):
        grad[t] = epsilon - y[t]
        grad[n + t] = epsilon + y[t]
    updates = 0
    violation = 0.0
    while True:
        best_up = -1.0e300
        best_low = 1.0e300
        i = -1
        for t in range(two_n):
            sign = 1.0 if t < n else -1.0
            val = -sign * grad[t]
            movable_up = a[t] < C if t < n else a[t] > 0.0
            movable_low = a[t] > 0.0 if t < n else a[t] < C
            if movable_up and val > best_up:
                best_up = val
                i = t
            if movable_low and val < best_low:
                best_low = val
        violation = best_up - best_low
        if i < 0 or violation <= tol or updates >= max_updates:
            break
        ii = i if i < n else i - n
        # second choice: maximal second-order objective decrease
        j = -1
        best_gain = -1.0
        for t in range(two_n):
            sign = 1.0 if t < n else -1.0
            movable_low = a[t] > 0.0 if t < n else a[t] < C
            if not movable_low:
                continue
            val = -sign * grad[t]
            gap = best_up - val
            if gap <= 0.0:
                continue
            tt = t if t < n else t - n
            curv = K[ii, ii] + K[tt, tt] - 2.0 * K[ii, tt]
            if curv < 1e-12:
                curv = 1e-12
            gain = gap * gap / curv
            if gain > best_gain:
                best_gain = gain
                j = t
        if j < 0:
            break
        jj = j if j < n else j - n
        sign_j0 = 1.0 if j < n else -1.0
        curvature = K[ii, ii] + K[jj, jj] - 2.0 * K[ii, jj]
        if curvature < 1e-12:
            curvature = 1e-12
        step = (best_up - (-sign_j0 * grad[j])) / curvature
        # box caps: i moves "up", j moves "down" in signed coordinates
        cap_i = (C - a[i]) if i < n else a[i]
        cap_j = a[j] if j < n else (C - a[j])
        if step > cap_i:
            step = cap_i
        if step > cap_j:
            step = cap_j
        sign_i = 1.0 if i < n else -1.0
        sign_j = 1.0 if j < n else -1.0
        a[i] += sign_i * step
        a[j] -= sign_j * step
        # snap to the box to keep index sets exact
        if a[i] < 1e-14:
            a[i] = 0.0
        elif a[i] > C - 1e-14 * C:
            a[i] = C
        if a[j] < 1e-14:
            a[j] = 0.0
        elif a[j] > C - 1e-14 * C:
            a[j] = C
        for t in range(n):
            delta = step * (K[t, ii] - K[t, jj])
            grad[t] += delta
            grad[n + t] -= delta
        updates += 1
    # bias from free multipliers, else from the violation interval midpoint
    nu_sum = 0.0
    nu_count = 0
    for t in range(two_n):
        if 0.0 < a[t] < C:
            sign = 1.0 if t < n else -1.0
            nu_sum += sign * grad[t]
            nu_count += 1
    if nu_count > 0:
        bias = -nu_sum / nu_count
    else:
        bias = 0.5 * (best_up + best_low)
    return a, bias, violation, updates


@dataclass
class SvrModel:
    """Kernel expansion f(x) = sum_i beta_i k(sv_i, x) + bias.

    ``dual_coefficients`` are the differences between upper- and lower-tube
    multipliers, so each lies in [-C, C] and they sum to zero.
    """

    support_inputs: np.ndarray
    dual_coefficients: np.ndarray
    bias: float
    gamma: float
    epsilon: float
    C: float
    support_indices: np.ndarray | None = field(default=None, repr=False, compare=False)

    @property
    def n_inputs(self) -> int:
        return self.support_inputs.shape[1]

    def predict(self, x) -> float:
        x = np.asarray(x, dtype=np.float64)
        if x.ndim != 1 or x.shape[0] != self.n_inputs:
            raise DimensionError(
                f"expected input of dimension {self.n_inputs}, got shape {x.shape}"
            )
        if len(self.dual_coefficients) == 0:
            return float(self.bias)
        k_row = rbf_gram(x[None, :], self.support_inputs, self.gamma)[0]
        return float(k_row @ self.dual_coefficients + self.bias)

    def predict_batch(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        if X.shape[1] != self.n_inputs:
            raise DimensionError(
                f"expected inputs of dimension {self.n_inputs}, got {X.shape[1]}"
            )
        if len(self.dual_coefficients) == 0:
            return np.full(X.shape[0], self.bias)
        return rbf_gram(X, self.support_inputs, self.gamma) @ self.dual_coefficients + self.bias


def train_svr(
    inputs,
    targets,
    C: float,
    epsilon: float,
    gamma: float,
    tol: float = DEFAULT_KKT_TOL,
    max_pair_updates: int | None = None,
) -> SvrModel:
    """Solve the epsilon-SVR dual with an RBF kernel.

    ``tol`` bounds the maximal KKT violation at termination; the update budget
    defaults to 10 * n * 1000 pair steps.
    """
    X = np.atleast_2d(np.asarray(inputs, dtype=np.float64))
    y = np.asarray(targets, dtype=np.float64).reshape(-1)
    if X.shape[0] != y.shape[0]:
        raise DimensionError("inputs and targets disagree on sample count")
    if X.shape[0] < 1:
        raise ValueError("need at least one training sample")
    if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
        raise TrainingError("non-finite values in SVR training data")
    if C <= 0.0 or epsilon < 0.0 or gamma <= 0.0:
        raise ValueError("require C > 0, epsilon >= 0, gamma > 0")
    n = X.shape[0]
    if max_pair_updates is None:
        max_pair_updates = 10 * n * 1000
    K = rbf_gram(X, X, gamma)
    a, bias, _violation, _updates = _smo(
        K, y, float(C), float(epsilon), float(tol), int(max_pair_updates)
    )
    beta = a[:n] - a[n:]
    keep = beta != 0.0
    return SvrModel(
        support_inputs=X[keep].copy(),
        dual_coefficients=beta[keep].copy(),
        bias=float(bias),
        gamma=float(gamma),
        epsilon=float(epsilon),
        C=float(C),
        support_indices=np.flatnonzero(keep),
    )


def predict_svr(model: SvrModel, x) -> float:
    """Kernel-expansion prediction for one input vector."""
    return model.predict(x)


def dual_objective(beta, K, targets, epsilon) -> float:
    """Minimisation-form dual value 0.5 b'Kb + eps*||b||_1 - y'b."""
    beta = np.asarray(beta, dtype=np.float64)
    y = np.asarray(targets, dtype=np.float64)
    return float(0.5 * beta @ (K @ beta) + epsilon * np.sum(np.abs(beta)) - y @ beta)


def model_dual_objective(model: SvrModel, inputs, targets) -> float:
    """Dual value of a trained model evaluated against its training set."""
    X = np.atleast_2d(np.asarray(inputs, dtype=np.float64))
    y = np.asarray(targets, dtype=np.float64).reshape(-1)
    beta = np.zeros(len(y))
    if model.support_indices is None:
        raise ValueError("model does not carry training support indices")
    beta[model.support_indices] = model.dual_coefficients
    return dual_objective(beta, rbf_gram(X, X, model.gamma), y, model.epsilon)
