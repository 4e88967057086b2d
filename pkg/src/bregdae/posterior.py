"""Gaussian approximation of the classifier weight posterior.

The trained squared-hinge model defines an energy-based distribution over
weights with temperature beta. Its Gaussian approximation is centered at the
trained weights (the mode) with a diagonal covariance read off the curvature:
per feature j,

    s_j        = sum over difficult rows of x_{ij}^2
    sigma_j    = 1 / (beta * max(s_j, epsilon_floor))

where a row is difficult when 1 - y (theta.x + bias) > 0, strictly. The
floor keeps features that never occur in difficult rows from producing an
infinite variance. With `exact_hessian` the curvature of the full objective
is used instead (a factor 2 plus the 2*lambda decay term).
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from .modelio import read_artifact, write_artifact
from .svm2 import LinearModel, margins

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Posterior:
    theta_hat: np.ndarray
    sigma_diag: np.ndarray
    beta: float
    epsilon_floor: float = 1e-8

    def __post_init__(self) -> None:
        object.__setattr__(self, "theta_hat", np.asarray(self.theta_hat, np.float64))
        object.__setattr__(self, "sigma_diag", np.asarray(self.sigma_diag, np.float64))
        if self.theta_hat.shape != self.sigma_diag.shape or self.theta_hat.ndim != 1:
            raise ValueError("theta_hat and sigma_diag must be parallel vectors")
        if self.beta <= 0:
            raise ValueError("beta must be positive")
        if self.epsilon_floor <= 0:
            raise ValueError("epsilon_floor must be positive")
        if np.any(self.sigma_diag <= 0):
            raise ValueError("sigma_diag entries must be positive")

    @property
    def dim(self) -> int:
        return int(self.theta_hat.size)


def difficult_mask(model: LinearModel, X, y: np.ndarray) -> np.ndarray:
    """Rows with 1 - y (theta.x + bias) > 0; the inequality is strict."""
    m = margins(model, X)
    if m.shape != np.shape(y):
        raise ValueError("label vector length does not match the matrix")
    return (1.0 - y * m) > 0.0


def sigma_diag(
    model: LinearModel,
    X,
    y: np.ndarray,
    beta: float,
    epsilon_floor: float = 1e-8,
    exact_hessian: bool = False,
) -> np.ndarray:
    """Diagonal covariance over the difficult rows, computed sparsely."""
    if beta <= 0:
        raise ValueError("beta must be positive")
    mask = difficult_mask(model, X, y)
    if not mask.any():
        logger.warning(
            "no difficult examples: every sigma entry floors at 1/(beta*epsilon)"
        )
    Xd = X[mask]
    if sp.issparse(Xd):
        s = np.asarray(Xd.multiply(Xd).sum(axis=0)).ravel()
    else:
        s = np.square(Xd).sum(axis=0)
    if exact_hessian:
        s = 2.0 * s + 2.0 * model.lam
    return 1.0 / (beta * np.maximum(s, epsilon_floor))


def build_posterior(
    model: LinearModel,
    X,
    y: np.ndarray,
    beta: float,
    epsilon_floor: float = 1e-8,
    exact_hessian: bool = False,
) -> Posterior:
    """Posterior mode and diagonal covariance for a trained model.

    The mode copies the model weights; the bias is discarded.
    """
    sig = sigma_diag(model, X, y, beta, epsilon_floor, exact_hessian)
    return Posterior(model.theta.copy(), sig, beta, epsilon_floor)


def save_posterior(post: Posterior, path: str | Path) -> None:
    write_artifact(
        path,
        "posterior",
        {"d": post.dim, "beta": post.beta, "epsilon_floor": post.epsilon_floor},
        {"theta_hat": post.theta_hat, "sigma_diag": post.sigma_diag},
    )


def load_posterior(path: str | Path) -> Posterior:
    meta, arrays = read_artifact(path, "posterior")
    return Posterior(
        arrays["theta_hat"], arrays["sigma_diag"], meta["beta"], meta["epsilon_floor"]
    )
