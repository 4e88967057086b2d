"""Linear classifier with squared hinge loss and l2 weight decay.

The objective over a labeled set is

    L(theta, bias) = sum_i max(0, 1 - y_i (theta.x_i + bias))^2 + lambda ||theta||^2

with the bias excluded from the penalty. The loss is continuous and
differentiable everywhere, so plain momentum SGD applies. Feature matrices
may be scipy sparse or dense ndarrays; gradient cost is proportional to the
number of stored nonzeros.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .modelio import read_artifact, write_artifact
from .optim import MomentumState, NumericalError, SgdConfig, minibatch_indices

logger = logging.getLogger(__name__)


@dataclass
class LinearModel:
    theta: np.ndarray
    bias: float = 0.0
    lam: float = 0.0

    def __post_init__(self) -> None:
        self.theta = np.asarray(self.theta, dtype=np.float64)
        self.bias = float(self.bias)
        if self.theta.ndim != 1:
            raise ValueError("theta must be a 1-d vector")
        if self.lam < 0:
            raise ValueError("lambda must be nonnegative")

    @property
    def dim(self) -> int:
        return int(self.theta.size)

    @classmethod
    def zeros(cls, d: int, lam: float = 0.0) -> "LinearModel":
        return cls(np.zeros(d), 0.0, lam)


def _check_dims(model: LinearModel, X) -> None:
    if X.ndim != 2 or X.shape[1] != model.dim:
        raise ValueError(
            f"feature matrix has {X.shape[1] if X.ndim == 2 else '?'} columns, "
            f"model expects {model.dim}"
        )


def margins(model: LinearModel, X) -> np.ndarray:
    """Decision values theta.x + bias, one per row."""
    _check_dims(model, X)
    return np.asarray(X @ model.theta).ravel() + model.bias


def svm2_loss(model: LinearModel, X, y: np.ndarray) -> float:
    """Squared hinge loss plus lambda * ||theta||^2 over the given rows."""
    m = margins(model, X)
    if m.shape != np.shape(y):
        raise ValueError("label vector length does not match the matrix")
    slack = np.maximum(0.0, 1.0 - y * m)
    return float(np.dot(slack, slack) + model.lam * np.dot(model.theta, model.theta))


def svm2_grad(model: LinearModel, X, y: np.ndarray) -> tuple[np.ndarray, float]:
    """Exact gradient of svm2_loss with respect to (theta, bias)."""
    m = margins(model, X)
    slack = np.maximum(0.0, 1.0 - y * m)
    coef = -2.0 * slack * y
    grad_theta = np.asarray(X.T @ coef).ravel() + 2.0 * model.lam * model.theta
    return grad_theta, float(coef.sum())


def train_svm2(X, y: np.ndarray, lam: float, config: SgdConfig) -> LinearModel:
    """Minimize the squared hinge objective with minibatch momentum SGD.

    Steps use the batch-mean gradient (the sum objective scaled by 1/n) so
    the default learning rate behaves the same at any batch size. Starts
    from the zero model; with epochs=0 that initial model is returned
    unchanged. A non-finite batch loss aborts with a diagnostic.
    """
    n = X.shape[0]
    if n == 0:
        raise ValueError("cannot train on an empty document set")
    model = LinearModel.zeros(X.shape[1], lam)
    initial_loss = svm2_loss(model, X, y)
    rng = np.random.default_rng(config.seed)
    params = {"theta": model.theta}
    state = MomentumState(params, config)
    bias_v = 0.0
    reg_coef = 2.0 * lam / n
    for epoch in range(config.epochs):
        for batch in minibatch_indices(n, config.batch_size, rng):
            Xb, yb = X[batch], y[batch]
            m = margins(model, Xb)
            slack = np.maximum(0.0, 1.0 - yb * m)
            batch_loss = np.dot(slack, slack) + lam * np.dot(model.theta, model.theta)
            if not np.isfinite(batch_loss):
                raise NumericalError(
                    f"non-finite svm2 loss at epoch {epoch}: {batch_loss!r}"
                )
            coef = (-2.0 / len(batch)) * slack * yb
            grads = {
                "theta": np.asarray(Xb.T @ coef).ravel() + reg_coef * model.theta
            }
            state.step(params, grads)
            bias_v = config.momentum * bias_v - config.learning_rate * coef.sum()
            model.bias += bias_v
    if config.epochs > 0:
        final_loss = svm2_loss(model, X, y)
        if final_loss > initial_loss:
            logger.warning(
                "training did not reduce the loss (%.6g -> %.6g); "
                "consider a smaller learning rate", initial_loss, final_loss,
            )
    return model


def predict(model: LinearModel, X) -> np.ndarray:
    """Predicted labels in {+1, -1}; a margin of exactly 0 maps to +1."""
    return np.where(margins(model, X) >= 0.0, 1.0, -1.0)


def error_rate(model: LinearModel, X, y: np.ndarray) -> float:
    """Fraction of rows whose predicted label differs from y."""
    if X.shape[0] == 0:
        raise ValueError("error rate over an empty document set is undefined")
    return float(np.mean(predict(model, X) != np.asarray(y)))


def save_linear_model(model: LinearModel, path: str | Path) -> None:
    write_artifact(
        path,
        "linear-model",
        {"d": model.dim, "lambda": model.lam, "bias": model.bias},
        {"theta": model.theta},
    )


def load_linear_model(path: str | Path) -> LinearModel:
    meta, arrays = read_artifact(path, "linear-model")
    return LinearModel(arrays["theta"], meta["bias"], meta["lambda"])
