"""Squared-hinge linear classifier: loss values, gradients, training."""

import numpy as np
import pytest
import scipy.optimize
import scipy.sparse as sp
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import central_diff, grad_rel_err, separable_toy
from bregdae.optim import NumericalError, SgdConfig
from bregdae.svm2 import (
    LinearModel,
    error_rate,
    load_linear_model,
    margins,
    predict,
    save_linear_model,
    svm2_grad,
    svm2_loss,
    train_svm2,
)


class TestLossValues:
    def test_zero_model_single_doc(self):
        """Any doc at margin 0 contributes (1 - 0)^2 = 1."""
        model = LinearModel.zeros(3)
        X = np.array([[0.2, 0.0, 1.4]])
        assert svm2_loss(model, X, np.array([1.0])) == 1.0

    def test_satisfied_margins_give_zero(self):
        model = LinearModel(np.array([2.0, 0.0]))
        X = np.array([[1.0, 0.0], [-1.0, 0.5]])
        y = np.array([1.0, -1.0])
        assert svm2_loss(model, X, y) == 0.0

    def test_hand_value_with_regularizer(self):
        """theta=(1,0), x=(0.5,0), y=+1, lambda=1 -> (1-0.5)^2 + 1 = 1.25."""
        model = LinearModel(np.array([1.0, 0.0]), bias=0.0, lam=1.0)
        assert svm2_loss(model, np.array([[0.5, 0.0]]), np.array([1.0])) == 1.25

    def test_dimension_mismatch(self):
        model = LinearModel.zeros(2)
        with pytest.raises(ValueError):
            svm2_loss(model, np.ones((1, 3)), np.array([1.0]))


class TestGradients:
    def test_inactive_hinge_zero_gradient(self):
        model = LinearModel(np.array([3.0, 0.0]))
        g, gb = svm2_grad(model, np.array([[1.0, 0.0]]), np.array([1.0]))
        np.testing.assert_array_equal(g, [0.0, 0.0])
        assert gb == 0.0

    def test_hand_gradient_at_zero(self):
        model = LinearModel.zeros(2)
        g, gb = svm2_grad(model, np.array([[1.0, 0.0]]), np.array([1.0]))
        np.testing.assert_array_equal(g, [-2.0, 0.0])
        assert gb == -2.0

    def test_finite_difference_agreement(self):
        """Analytic gradient matches central differences on 100 random pairs."""
        rng = np.random.default_rng(42)
        for _ in range(100):
            n, d = int(rng.integers(1, 8)), int(rng.integers(1, 10))
            X = rng.normal(size=(n, d))
            y = rng.choice([-1.0, 1.0], size=n)
            theta = rng.normal(size=d)
            bias = float(rng.normal())
            lam = float(rng.uniform(0.0, 0.5))
            model = LinearModel(theta, bias, lam)
            g_theta, g_bias = svm2_grad(model, X, y)

            def f(vec):
                return svm2_loss(LinearModel(vec[:d], vec[d], lam), X, y)

            fd = central_diff(f, np.append(theta, bias))
            assert grad_rel_err(np.append(g_theta, g_bias), fd) < 1e-4

    def test_sparse_and_dense_agree(self):
        rng = np.random.default_rng(3)
        X = rng.random((6, 5)) * (rng.random((6, 5)) > 0.5)
        y = rng.choice([-1.0, 1.0], size=6)
        model = LinearModel(rng.normal(size=5), 0.2, 0.1)
        g_dense, gb_dense = svm2_grad(model, X, y)
        g_sparse, gb_sparse = svm2_grad(model, sp.csr_matrix(X), y)
        np.testing.assert_allclose(g_sparse, g_dense, atol=1e-12)
        assert gb_sparse == pytest.approx(gb_dense, abs=1e-12)


class TestConvexity:
    @given(seed=st.integers(0, 10_000), t=st.floats(0.0, 1.0))
    @settings(max_examples=60, deadline=None)
    def test_interpolation_inequality(self, seed, t):
        """loss(t a + (1-t) b) <= t loss(a) + (1-t) loss(b) + tolerance."""
        rng = np.random.default_rng(seed)
        X = rng.normal(size=(5, 4))
        y = rng.choice([-1.0, 1.0], size=5)
        lam = 0.3
        a = rng.normal(size=5)  # theta (4) plus bias
        b = rng.normal(size=5)
        mid = t * a + (1 - t) * b

        def loss(vec):
            return svm2_loss(LinearModel(vec[:4], vec[4], lam), X, y)

        assert loss(mid) <= t * loss(a) + (1 - t) * loss(b) + 1e-9


class TestMonotoneRegularization:
    def test_penalty_grows_with_lambda_at_optimum(self):
        """Solving to convergence, a larger lambda never enlarges ||theta||^2
        and never shrinks the data-fit part of the loss."""
        rng = np.random.default_rng(7)
        X = rng.normal(size=(30, 4))
        y = np.where(X @ np.array([1.0, -2.0, 0.5, 0.0]) > 0, 1.0, -1.0)

        def solve(lam):
            def f(vec):
                return svm2_loss(LinearModel(vec[:4], vec[4], lam), X, y)

            res = scipy.optimize.minimize(f, np.zeros(5), method="Nelder-Mead",
                                          options={"xatol": 1e-10, "fatol": 1e-12,
                                                   "maxiter": 20000})
            theta = res.x[:4]
            data_part = f(res.x) - lam * theta @ theta
            return float(theta @ theta), float(data_part)

        norms, fits = zip(*(solve(lam) for lam in (0.01, 0.1, 1.0, 10.0)))
        for small, large in zip(norms, norms[1:]):
            assert large <= small + 1e-6
        for small, large in zip(fits, fits[1:]):
            assert large >= small - 1e-8


class TestTraining:
    def test_separable_toy_reaches_zero_error(self):
        X, y = separable_toy()
        model = train_svm2(X, y, 1e-4, SgdConfig(seed=0))
        assert error_rate(model, X, y) == 0.0

    def test_zero_epochs_returns_zero_model(self):
        X, y = separable_toy()
        model = train_svm2(X, y, 0.5, SgdConfig(epochs=0, seed=1))
        np.testing.assert_array_equal(model.theta, np.zeros(2))
        assert model.bias == 0.0

    def test_same_seed_bitwise_identical(self):
        X, y = separable_toy()
        a = train_svm2(X, y, 1e-4, SgdConfig(seed=9))
        b = train_svm2(X, y, 1e-4, SgdConfig(seed=9))
        np.testing.assert_array_equal(a.theta, b.theta)
        assert a.bias == b.bias

    def test_training_reduces_loss(self):
        X, y = separable_toy()
        model = train_svm2(X, y, 1e-4, SgdConfig(seed=2))
        assert svm2_loss(model, X, y) <= svm2_loss(LinearModel.zeros(2, 1e-4), X, y)

    def test_divergence_aborts_with_diagnostic(self):
        # identical docs with conflicting labels cannot be satisfied, so a
        # huge step size grows the weights without bound until overflow
        X = np.tile([1.0, 0.0], (10, 1))
        y = np.array([1.0] * 7 + [-1.0] * 3)
        with pytest.raises(NumericalError, match="non-finite"):
            train_svm2(X, y, 0.0, SgdConfig(learning_rate=1e150, seed=0))

    def test_empty_set_rejected(self):
        with pytest.raises(ValueError):
            train_svm2(np.zeros((0, 2)), np.zeros(0), 0.0, SgdConfig())


class TestPrediction:
    def test_positive_margin(self):
        model = LinearModel(np.array([1.0, -1.0]))
        np.testing.assert_array_equal(predict(model, np.array([[1.0, 0.0]])), [1.0])

    def test_zero_margin_maps_to_plus_one(self):
        model = LinearModel.zeros(2)
        np.testing.assert_array_equal(predict(model, np.array([[0.3, 0.4]])), [1.0])

    def test_error_rate_on_perfect_model(self):
        X, y = separable_toy()
        model = LinearModel(np.array([1.0, -1.0]))
        assert error_rate(model, X, y) == 0.0

    def test_error_rate_empty_set(self):
        with pytest.raises(ValueError):
            error_rate(LinearModel.zeros(2), np.zeros((0, 2)), np.zeros(0))


class TestSerialization:
    def test_round_trip_exact(self, tmp_path):
        rng = np.random.default_rng(11)
        model = LinearModel(rng.normal(size=9), bias=-0.37, lam=1e-3)
        path = tmp_path / "m.bdz"
        save_linear_model(model, path)
        back = load_linear_model(path)
        np.testing.assert_array_equal(back.theta, model.theta)
        assert back.bias == model.bias and back.lam == model.lam

    def test_margins_survive_round_trip(self, tmp_path):
        rng = np.random.default_rng(12)
        model = LinearModel(rng.normal(size=4), 0.1, 0.0)
        X = rng.random((5, 4))
        path = tmp_path / "m.bdz"
        save_linear_model(model, path)
        np.testing.assert_array_equal(
            margins(load_linear_model(path), X), margins(model, X)
        )
