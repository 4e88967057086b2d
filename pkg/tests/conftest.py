"""Shared numeric oracles and small data builders for the test suite."""

from __future__ import annotations

import numpy as np

from bregdae.autoencoder import AeModel, LossSpec, init_ae


def central_diff(f, x: np.ndarray, h: float = 1e-6) -> np.ndarray:
    """Gradient of a scalar function at x by central finite differences."""
    x = np.asarray(x, np.float64)
    grad = np.empty_like(x)
    for i in range(x.size):
        up = x.copy()
        down = x.copy()
        up[i] += h
        down[i] -= h
        grad[i] = (f(up) - f(down)) / (2.0 * h)
    return grad


def grad_rel_err(analytic, numeric) -> float:
    """Relative disagreement of two gradients, by vector norm."""
    a = np.asarray(analytic, np.float64).ravel()
    b = np.asarray(numeric, np.float64).ravel()
    scale = max(float(np.linalg.norm(a)), float(np.linalg.norm(b)), 1e-10)
    return float(np.linalg.norm(a - b)) / scale


def flatten_ae(model: AeModel) -> np.ndarray:
    return np.concatenate([model.W.ravel(), model.b, model.b_prime])


def unflatten_ae(vec: np.ndarray, k: int, d: int, loss: LossSpec) -> AeModel:
    vec = np.asarray(vec, np.float64)
    W = vec[: k * d].reshape(k, d)
    b = vec[k * d : k * d + k]
    b_prime = vec[k * d + k :]
    return AeModel(W, b, b_prime, loss)


def random_ae_instance(
    rng: np.random.Generator, d: int, k: int, loss: LossSpec, relu_guard: float = 1e-3
):
    """A model plus a (corrupted, clean) pair with pre-activations away from 0.

    The relu kink would spoil finite differences, so instances whose hidden
    pre-activation comes within `relu_guard` of zero are resampled.
    """
    for _ in range(200):
        model = init_ae(d, k, loss, seed=int(rng.integers(2**31)))
        model.b[:] = rng.normal(0.0, 0.3, size=k)
        model.b_prime[:] = rng.normal(0.0, 0.3, size=d)
        x = rng.random(d)
        x[rng.random(d) < 0.3] = 0.0
        x_bar = x * (rng.random(d) >= 0.3)
        pre = model.W @ x_bar + model.b
        if np.min(np.abs(pre)) > relu_guard:
            return model, x_bar, x
    raise AssertionError("could not sample an instance away from the relu kink")


def make_loss_spec(kind: str, rng: np.random.Generator, d: int) -> LossSpec:
    """Random loss parameters of the requested kind."""
    from bregdae.posterior import Posterior

    if kind == "squared_euclidean":
        return LossSpec.squared_euclidean()
    if kind == "elementwise_kl":
        return LossSpec.elementwise_kl()
    if kind == "projected_quadratic":
        return LossSpec.projected_quadratic(rng.normal(size=d))
    post = Posterior(rng.normal(size=d), rng.uniform(0.1, 2.0, size=d), beta=1.0)
    return LossSpec.marginalized_bregman(post)


def separable_toy():
    """Two point masses on the axes: x=(1,0) labeled +1, x=(0,1) labeled -1."""
    X = np.vstack([np.tile([1.0, 0.0], (50, 1)), np.tile([0.0, 1.0], (50, 1))])
    y = np.concatenate([np.ones(50), -np.ones(50)])
    return X, y
