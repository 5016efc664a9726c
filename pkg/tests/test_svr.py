import numpy as np
import pytest

from flucast.errors import DimensionError, TrainingError
from flucast.models import (
    SvrModel,
    model_dual_objective,
    predict_svr,
    rbf_gram,
    rbf_kernel,
    train_svr,
)
from oracles import svr_dual_brute_force


class TestRbfKernel:
    def test_identical_inputs_give_one(self):
        x = np.array([1.0, -2.0, 3.0])
        assert rbf_kernel(x, x, 0.7) == 1.0

    def test_known_value(self):
        # gamma=0.1 and squared distance 10 gives exp(-1)
        x = np.zeros(1)
        y = np.array([np.sqrt(10.0)])
        assert rbf_kernel(x, y, 0.1) == pytest.approx(np.exp(-1.0), rel=1e-12)

    def test_symmetry(self):
        rng = np.random.default_rng(0)
        for _ in range(20):
            x, y = rng.normal(size=4), rng.normal(size=4)
            assert rbf_kernel(x, y, 0.3) == rbf_kernel(y, x, 0.3)

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionError):
            rbf_kernel(np.zeros(2), np.zeros(3), 1.0)

    def test_gram_matches_pointwise(self):
        rng = np.random.default_rng(1)
        X = rng.normal(size=(6, 3))
        K = rbf_gram(X, X, 0.4)
        for i in range(6):
            for j in range(6):
                assert K[i, j] == pytest.approx(rbf_kernel(X[i], X[j], 0.4), abs=1e-14)


def random_problem(rng, n=5, d=2):
    X = rng.normal(size=(n, d))
    y = rng.normal(size=n)
    C = float(rng.uniform(0.3, 3.0))
    epsilon = float(rng.uniform(0.01, 0.3))
    gamma = float(rng.uniform(0.2, 1.5))
    return X, y, C, epsilon, gamma


class TestTrainSvr:
    def test_constant_targets_fit_within_epsilon(self):
        rng = np.random.default_rng(2)
        X = rng.normal(size=(8, 3))
        y = np.full(8, 1.7)
        model = train_svr(X, y, C=1.0, epsilon=0.05, gamma=0.5)
        for row in X:
            assert abs(model.predict(row) - 1.7) <= 0.05 + 1e-9

    def test_single_training_point(self):
        model = train_svr(np.array([[1.0, 2.0]]), np.array([3.0]), 1.0, 0.1, 0.5)
        assert abs(model.predict(np.array([1.0, 2.0])) - 3.0) <= 0.1 + 1e-9

    def test_box_and_equality_constraints(self):
        rng = np.random.default_rng(3)
        for _ in range(10):
            X, y, C, epsilon, gamma = random_problem(rng)
            model = train_svr(X, y, C, epsilon, gamma)
            assert np.all(np.abs(model.dual_coefficients) <= C + 1e-12)
            assert abs(model.dual_coefficients.sum()) < 1e-9

    def test_non_finite_inputs_rejected(self):
        with pytest.raises(TrainingError):
            train_svr(np.array([[np.nan]]), np.array([1.0]), 1.0, 0.1, 0.5)

    def test_dual_objective_matches_brute_force(self):
        rng = np.random.default_rng(4)
        for _ in range(20):
            X, y, C, epsilon, gamma = random_problem(rng)
            model = train_svr(X, y, C, epsilon, gamma, tol=1e-12)
            smo_objective = model_dual_objective(model, X, y)
            K = rbf_gram(X, X, gamma)
            oracle_objective, _ = svr_dual_brute_force(K, y, C, epsilon)
            assert smo_objective == pytest.approx(oracle_objective, abs=1e-6)

    def test_kkt_conditions_at_default_tolerance(self):
        rng = np.random.default_rng(5)
        for _ in range(10):
            X, y, C, epsilon, gamma = random_problem(rng, n=12, d=3)
            model = train_svr(X, y, C, epsilon, gamma)
            assert_kkt(model, X, y, tol=1e-3)

    def test_residuals_beyond_epsilon_need_bound_coefficients(self):
        rng = np.random.default_rng(6)
        X, y, C, epsilon, gamma = random_problem(rng, n=15, d=2)
        model = train_svr(X, y, C, epsilon, gamma)
        beta = np.zeros(len(y))
        beta[model.support_indices] = model.dual_coefficients
        predictions = model.predict_batch(X)
        for i in range(len(y)):
            if abs(y[i] - predictions[i]) > epsilon + 1e-3:
                assert abs(beta[i]) >= C - 1e-3


def assert_kkt(model: SvrModel, X, y, tol):
    beta = np.zeros(len(y))
    beta[model.support_indices] = model.dual_coefficients
    C, epsilon = model.C, model.epsilon
    predictions = model.predict_batch(X)
    residuals = y - predictions
    for b, r in zip(beta, residuals):
        if b >= C - tol:
            assert r >= epsilon - tol
        elif b <= -C + tol:
            assert r <= -epsilon + tol
        elif abs(b) <= tol:
            assert abs(r) <= epsilon + tol
        elif b > 0:
            assert abs(r - epsilon) <= tol
        else:
            assert abs(r + epsilon) <= tol


class TestPredictSvr:
    def test_zero_duals_predict_bias(self):
        model = SvrModel(
            support_inputs=np.zeros((0, 2)),
            dual_coefficients=np.zeros(0),
            bias=0.42,
            gamma=0.5,
            epsilon=0.1,
            C=1.0,
        )
        assert predict_svr(model, np.array([5.0, -1.0])) == 0.42

    def test_hand_expanded_two_support_vectors(self):
        sv = np.array([[0.0, 0.0], [1.0, 1.0]])
        beta = np.array([0.5, -0.25])
        model = SvrModel(sv, beta, bias=0.1, gamma=0.3, epsilon=0.1, C=1.0)
        x = np.array([1.0, 0.0])
        expected = (
            0.5 * np.exp(-0.3 * 1.0) - 0.25 * np.exp(-0.3 * 1.0) + 0.1
        )
        assert model.predict(x) == pytest.approx(expected, rel=1e-12)

    def test_dimension_mismatch(self):
        model = SvrModel(np.zeros((1, 2)), np.array([1.0]), 0.0, 0.5, 0.1, 1.0)
        with pytest.raises(DimensionError):
            model.predict(np.zeros(3))
