"""Tied-weight denoising autoencoder with pluggable reconstruction losses.

The encoder is h = relu(W x + b) and the decoder reuses the same weights,
x_tilde = sigmoid(W' h + b') with W' = W.T (never stored separately). Training
corrupts each input with masking noise, encodes the corrupted copy, and
measures the reconstruction against the clean input under one of four
divergences:

    squared_euclidean     sum_j (xt_j - x_j)^2
    elementwise_kl        sum_j x_j log(x_j/xt_j) + (1-x_j) log((1-x_j)/(1-xt_j))
    projected_quadratic   (theta . (xt - x))^2
    marginalized_bregman  (theta_hat . (xt - x))^2 + sum_j sigma_j (xt_j - x_j)^2

The last one augments the projection onto the classifier weights with a
variance-weighted squared error from the weight posterior; with theta_hat = 0
and unit sigma it reduces exactly to the squared Euclidean loss.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.sparse as sp
from scipy.special import expit, xlogy

from .modelio import read_artifact, write_artifact
from .optim import MomentumState, NumericalError, SgdConfig, minibatch_indices
from .posterior import Posterior

LOSS_KINDS = (
    "squared_euclidean",
    "elementwise_kl",
    "projected_quadratic",
    "marginalized_bregman",
)


@dataclass(frozen=True)
class LossSpec:
    """Reconstruction divergence selector, carrying any parameters it needs."""

    kind: str
    theta: np.ndarray | None = None
    posterior: Posterior | None = None

    def __post_init__(self) -> None:
        if self.kind not in LOSS_KINDS:
            raise ValueError(f"unknown loss kind {self.kind!r}")
        if self.kind == "projected_quadratic":
            if self.theta is None:
                raise ValueError("projected_quadratic needs a weight vector")
            object.__setattr__(self, "theta", np.asarray(self.theta, np.float64))
        elif self.kind == "marginalized_bregman":
            if self.posterior is None:
                raise ValueError("marginalized_bregman needs a posterior")

    @classmethod
    def squared_euclidean(cls) -> "LossSpec":
        return cls("squared_euclidean")

    @classmethod
    def elementwise_kl(cls) -> "LossSpec":
        return cls("elementwise_kl")

    @classmethod
    def projected_quadratic(cls, theta: np.ndarray) -> "LossSpec":
        return cls("projected_quadratic", theta=theta)

    @classmethod
    def marginalized_bregman(cls, posterior: Posterior) -> "LossSpec":
        return cls("marginalized_bregman", posterior=posterior)

    @property
    def dim(self) -> int | None:
        """Input dimension the loss is pinned to, if any."""
        if self.kind == "projected_quadratic":
            return int(self.theta.size)
        if self.kind == "marginalized_bregman":
            return self.posterior.dim
        return None


@dataclass(frozen=True)
class NoiseSpec:
    """Masking noise: each nonzero entry is zeroed independently with `rate`."""

    rate: float = 0.3
    seed: int = 0
    kind: str = "masking"

    def __post_init__(self) -> None:
        if self.kind != "masking":
            raise ValueError(f"unknown noise kind {self.kind!r}")
        if not 0.0 <= self.rate < 1.0:
            raise ValueError("rate must lie in [0, 1)")


@dataclass
class AeModel:
    """Tied-weight autoencoder parameters; the decoder weight is W.T."""

    W: np.ndarray
    b: np.ndarray
    b_prime: np.ndarray
    loss: LossSpec

    def __post_init__(self) -> None:
        self.W = np.asarray(self.W, np.float64)
        self.b = np.asarray(self.b, np.float64)
        self.b_prime = np.asarray(self.b_prime, np.float64)
        k, d = self.W.shape
        if self.b.shape != (k,) or self.b_prime.shape != (d,):
            raise ValueError("bias shapes do not match W")
        if k < 1:
            raise ValueError("hidden size must be at least 1")
        if self.loss.dim is not None and self.loss.dim != d:
            raise ValueError(
                f"loss is pinned to dimension {self.loss.dim}, model input is {d}"
            )

    @property
    def hidden_size(self) -> int:
        return int(self.W.shape[0])

    @property
    def input_size(self) -> int:
        return int(self.W.shape[1])

    def copy(self) -> "AeModel":
        return AeModel(self.W.copy(), self.b.copy(), self.b_prime.copy(), self.loss)


def init_ae(d: int, k: int, loss: LossSpec, seed: int = 0) -> AeModel:
    """Fresh model: W uniform in [-1/sqrt(d), 1/sqrt(d)], biases zero."""
    rng = np.random.default_rng(seed)
    bound = 1.0 / np.sqrt(d)
    W = rng.uniform(-bound, bound, size=(k, d))
    return AeModel(W, np.zeros(k), np.zeros(d), loss)


def _as_dense_batch(X) -> np.ndarray:
    if sp.issparse(X):
        return X.toarray().astype(np.float64, copy=False)
    X = np.asarray(X, np.float64)
    return X.reshape(1, -1) if X.ndim == 1 else X


def _encode_batch(W: np.ndarray, b: np.ndarray, X) -> tuple[np.ndarray, np.ndarray]:
    pre = np.asarray(X @ W.T) + b
    return pre, np.maximum(pre, 0.0)


def encode(model: AeModel, x) -> np.ndarray:
    """Hidden activation relu(W x + b) for a single document."""
    if sp.issparse(x):
        if x.shape[1] != model.input_size:
            raise ValueError("input dimension does not match the model")
        return _encode_batch(model.W, model.b, x)[1].ravel()
    x = np.asarray(x, np.float64)
    if x.shape != (model.input_size,):
        raise ValueError("input dimension does not match the model")
    return np.maximum(model.W @ x + model.b, 0.0)


def decode(model: AeModel, h: np.ndarray) -> np.ndarray:
    """Reconstruction sigmoid(W.T h + b') for a single hidden vector."""
    h = np.asarray(h, np.float64)
    if h.shape != (model.hidden_size,):
        raise ValueError("hidden dimension does not match the model")
    return expit(model.W.T @ h + model.b_prime)


def corrupt(x: np.ndarray, noise: NoiseSpec, rng: np.random.Generator) -> np.ndarray:
    """Masking corruption of one vector; zeros always stay zero."""
    x = np.asarray(x, np.float64)
    return x * (rng.random(x.shape) >= noise.rate)


def _loss_and_residual_grad(
    spec: LossSpec, Xt: np.ndarray, X: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Per-row loss values and the gradient of the loss in x_tilde."""
    if Xt.shape != X.shape:
        raise ValueError("reconstruction and input shapes differ")
    R = Xt - X
    if spec.kind == "squared_euclidean":
        return np.sum(R * R, axis=1), 2.0 * R
    if spec.kind == "elementwise_kl":
        if np.any(Xt <= 0.0) or np.any(Xt >= 1.0):
            raise ValueError("elementwise KL needs reconstructions inside (0, 1)")
        if np.any(X < 0.0) or np.any(X > 1.0):
            raise ValueError("elementwise KL needs inputs inside [0, 1]")
        loss = np.sum(xlogy(X, X / Xt) + xlogy(1.0 - X, (1.0 - X) / (1.0 - Xt)), axis=1)
        return loss, -X / Xt + (1.0 - X) / (1.0 - Xt)
    if spec.kind == "projected_quadratic":
        p = R @ spec.theta
        return p * p, (2.0 * p)[:, None] * spec.theta[None, :]
    # marginalized_bregman
    post = spec.posterior
    p = R @ post.theta_hat
    loss = p * p + np.sum(post.sigma_diag * R * R, axis=1)
    grad = (2.0 * p)[:, None] * post.theta_hat[None, :] + 2.0 * post.sigma_diag * R
    return loss, grad


def reconstruction_loss(spec: LossSpec, x_tilde: np.ndarray, x: np.ndarray) -> float:
    """Divergence of a single reconstruction from its clean input."""
    x_tilde = np.asarray(x_tilde, np.float64).reshape(1, -1)
    x = np.asarray(x, np.float64).reshape(1, -1)
    if spec.dim is not None and x.shape[1] != spec.dim:
        raise ValueError("input dimension does not match the loss parameters")
    loss, _ = _loss_and_residual_grad(spec, x_tilde, x)
    return float(loss[0])


def _backward(
    model: AeModel,
    Xbar: np.ndarray,
    X: np.ndarray,
    spec: LossSpec,
) -> tuple[np.ndarray, dict[str, np.ndarray]]:
    """Batch forward/backward pass. Returns per-row losses and summed gradients.

    The tied weight collects both contributions: the decoder term H.T dZ and
    the encoder term dA.T Xbar. The relu subgradient at exactly 0 is taken
    as 0 (strict positivity test on the pre-activation).
    """
    pre, H = _encode_batch(model.W, model.b, Xbar)
    Z = H @ model.W + model.b_prime
    Xt = expit(Z)
    loss, dXt = _loss_and_residual_grad(spec, Xt, X)
    dZ = dXt * Xt * (1.0 - Xt)
    dH = dZ @ model.W.T
    dA = dH * (pre > 0.0)
    grads = {
        "W": dA.T @ Xbar + H.T @ dZ,
        "b": dA.sum(axis=0),
        "b_prime": dZ.sum(axis=0),
    }
    return loss, grads


def loss_gradient(
    model: AeModel, x_bar: np.ndarray, x: np.ndarray, loss: LossSpec | None = None
) -> dict[str, np.ndarray]:
    """Gradients of the reconstruction loss for one (corrupted, clean) pair.

    Keys are "W", "b", "b_prime". The loss defaults to the model's own spec.
    """
    spec = model.loss if loss is None else loss
    Xbar = np.asarray(x_bar, np.float64).reshape(1, -1)
    X = np.asarray(x, np.float64).reshape(1, -1)
    if Xbar.shape[1] != model.input_size:
        raise ValueError("input dimension does not match the model")
    values, grads = _backward(model, Xbar, X, spec)
    if not np.isfinite(values[0]) or not all(
        np.all(np.isfinite(g)) for g in grads.values()
    ):
        raise NumericalError("non-finite value in reconstruction gradient")
    return grads


def train_dae(
    X,
    model: AeModel,
    noise: NoiseSpec,
    config: SgdConfig,
    on_epoch=None,
) -> AeModel:
    """Train a copy of `model` for config.epochs passes over the rows of X.

    Each example is corrupted freshly once per epoch; a momentum step is
    applied per minibatch with the batch-mean gradient, so the learning
    rate is insensitive to batch size. Labels play no role here, so labeled
    and unlabeled rows mix freely. `on_epoch`, when given, receives
    (epoch, mean reconstruction loss).
    """
    n = X.shape[0]
    if n == 0:
        raise ValueError("cannot train on an empty document set")
    if X.shape[1] != model.input_size:
        raise ValueError("input dimension does not match the model")
    out = model.copy()
    params = {"W": out.W, "b": out.b, "b_prime": out.b_prime}
    state = MomentumState(params, config)
    shuffle_rng = np.random.default_rng(config.seed)
    noise_rng = np.random.default_rng(noise.seed)
    for epoch in range(config.epochs):
        total = 0.0
        for batch in minibatch_indices(n, config.batch_size, shuffle_rng):
            Xb = _as_dense_batch(X[batch])
            Xbar = Xb * (noise_rng.random(Xb.shape) >= noise.rate)
            values, grads = _backward(out, Xbar, Xb, out.loss)
            batch_loss = values.sum()
            if not np.isfinite(batch_loss):
                raise NumericalError(
                    f"non-finite reconstruction loss at epoch {epoch}: {batch_loss!r}"
                )
            total += batch_loss
            scale = 1.0 / Xb.shape[0]
            state.step(params, {k: g * scale for k, g in grads.items()})
        if on_epoch is not None:
            on_epoch(epoch, total / n)
    return out


def extract_features(model, X, chunk: int = 512) -> np.ndarray:
    """Hidden activations for every row of X, computed on clean inputs."""
    n = X.shape[0]
    if X.shape[1] != model.W.shape[1]:
        raise ValueError("input dimension does not match the model")
    out = np.empty((n, model.W.shape[0]), dtype=np.float64)
    for start in range(0, n, chunk):
        Xb = _as_dense_batch(X[start : start + chunk])
        out[start : start + Xb.shape[0]] = _encode_batch(model.W, model.b, Xb)[1]
    return out


@dataclass
class FinetunedModel:
    """Encoder weights plus a binary logistic head on the hidden layer."""

    W: np.ndarray
    b: np.ndarray
    head_w: np.ndarray
    head_b: float

    def logits(self, X) -> np.ndarray:
        H = _encode_batch(self.W, self.b, _as_dense_batch(X))[1]
        return H @ self.head_w + self.head_b


def _finetune_loss_grads(
    W: np.ndarray,
    b: np.ndarray,
    head_w: np.ndarray,
    head_b: float,
    X: np.ndarray,
    y: np.ndarray,
) -> tuple[float, dict[str, np.ndarray]]:
    pre, H = _encode_batch(W, b, X)
    z = H @ head_w + head_b
    loss = float(np.logaddexp(0.0, -y * z).sum())
    dz = expit(z) - 0.5 * (y + 1.0)
    dH = dz[:, None] * head_w[None, :]
    dA = dH * (pre > 0.0)
    grads = {
        "W": dA.T @ X,
        "b": dA.sum(axis=0),
        "head_w": H.T @ dz,
        "head_b": np.asarray(dz.sum()),
    }
    return loss, grads


def finetune_loss(ft: FinetunedModel, X, y: np.ndarray) -> float:
    """Summed cross-entropy of the logistic head over labels in {+1, -1}."""
    value, _ = _finetune_loss_grads(
        ft.W, ft.b, ft.head_w, ft.head_b, _as_dense_batch(X), np.asarray(y, np.float64)
    )
    return value


def finetune_grad(ft: FinetunedModel, X, y: np.ndarray) -> dict[str, np.ndarray]:
    """Gradients of finetune_loss for keys W, b, head_w, head_b."""
    _, grads = _finetune_loss_grads(
        ft.W, ft.b, ft.head_w, ft.head_b, _as_dense_batch(X), np.asarray(y, np.float64)
    )
    return grads


def finetune_softmax(
    model: AeModel,
    X,
    y: np.ndarray,
    config: SgdConfig,
    freeze_encoder: bool = False,
    on_epoch=None,
) -> FinetunedModel:
    """Replace the decoder with a binary classification head and train jointly.

    The decoder bias is discarded; the head starts at zero, and encoder and
    head are updated together by backpropagating the cross-entropy (unless
    `freeze_encoder`, which trains the head alone on fixed features).
    """
    n = X.shape[0]
    if n == 0:
        raise ValueError("cannot finetune on an empty document set")
    y = np.asarray(y, np.float64)
    ft = FinetunedModel(
        model.W.copy(), model.b.copy(), np.zeros(model.hidden_size), 0.0
    )
    params = {"W": ft.W, "b": ft.b, "head_w": ft.head_w}
    state = MomentumState(params, config)
    head_b_v = 0.0
    rng = np.random.default_rng(config.seed)
    for epoch in range(config.epochs):
        total = 0.0
        for batch in minibatch_indices(n, config.batch_size, rng):
            Xb = _as_dense_batch(X[batch])
            loss, grads = _finetune_loss_grads(
                ft.W, ft.b, ft.head_w, ft.head_b, Xb, y[batch]
            )
            if not np.isfinite(loss):
                raise NumericalError(
                    f"non-finite finetune loss at epoch {epoch}: {loss!r}"
                )
            total += loss
            if freeze_encoder:
                grads = dict(grads, W=np.zeros_like(ft.W), b=np.zeros_like(ft.b))
            scale = 1.0 / Xb.shape[0]
            state.step(params, {k: grads[k] * scale for k in params})
            head_b_v = config.momentum * head_b_v - config.learning_rate * scale * float(
                grads["head_b"]
            )
            ft.head_b += head_b_v
        if on_epoch is not None:
            on_epoch(epoch, total / n)
    return ft


def _loss_meta_arrays(spec: LossSpec) -> tuple[dict, dict[str, np.ndarray]]:
    if spec.kind == "projected_quadratic":
        return {}, {"loss_theta": spec.theta}
    if spec.kind == "marginalized_bregman":
        post = spec.posterior
        return (
            {"beta": post.beta, "epsilon_floor": post.epsilon_floor},
            {"theta_hat": post.theta_hat, "sigma_diag": post.sigma_diag},
        )
    return {}, {}


def save_ae_model(model: AeModel, path: str | Path) -> None:
    meta = {
        "d": model.input_size,
        "k": model.hidden_size,
        "loss": model.loss.kind,
    }
    extra_meta, extra_arrays = _loss_meta_arrays(model.loss)
    meta.update(extra_meta)
    arrays = {"W": model.W, "b": model.b, "b_prime": model.b_prime}
    arrays.update(extra_arrays)
    write_artifact(path, "ae-model", meta, arrays)


def load_ae_model(path: str | Path) -> AeModel:
    meta, arrays = read_artifact(path, "ae-model")
    kind = meta["loss"]
    if kind == "projected_quadratic":
        spec = LossSpec.projected_quadratic(arrays["loss_theta"])
    elif kind == "marginalized_bregman":
        spec = LossSpec.marginalized_bregman(
            Posterior(
                arrays["theta_hat"],
                arrays["sigma_diag"],
                meta["beta"],
                meta["epsilon_floor"],
            )
        )
    else:
        spec = LossSpec(kind)
    return AeModel(arrays["W"], arrays["b"], arrays["b_prime"], spec)
