"""Minibatch SGD plumbing shared by the linear classifier and the autoencoder."""

from __future__ import annotations

import zlib
from dataclasses import dataclass
from typing import Iterator

import numpy as np


class NumericalError(RuntimeError):
    """Raised when a training loop encounters a non-finite loss or gradient."""


@dataclass(frozen=True)
class SgdConfig:
    """Hyperparameters for momentum SGD.

    Updates follow v <- momentum * v - learning_rate * grad; param <- param + v.
    """

    learning_rate: float = 0.01
    momentum: float = 0.9
    epochs: int = 30
    batch_size: int = 64
    seed: int = 0

    def __post_init__(self) -> None:
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if not 0 <= self.momentum < 1:
            raise ValueError("momentum must lie in [0, 1)")
        if self.epochs < 0:
            raise ValueError("epochs must be nonnegative")
        if self.batch_size < 1:
            raise ValueError("batch_size must be positive")


def derive_seed(master: int, stage: str) -> int:
    """Expand a single master seed into a per-stage seed.

    The derivation is fixed (CRC32 of the stage name mixed into a numpy
    SeedSequence) so that partial re-runs of a pipeline stay reproducible.
    """
    tag = zlib.crc32(stage.encode("utf-8"))
    return int(np.random.SeedSequence([master, tag]).generate_state(1)[0])


def stage_rng(master: int, stage: str) -> np.random.Generator:
    """Generator seeded by `derive_seed(master, stage)`."""
    return np.random.default_rng(derive_seed(master, stage))


def minibatch_indices(
    n: int, batch_size: int, rng: np.random.Generator
) -> Iterator[np.ndarray]:
    """Yield index arrays covering a fresh permutation of range(n).

    The final batch may be smaller than `batch_size`.
    """
    order = rng.permutation(n)
    for start in range(0, n, batch_size):
        yield order[start : start + batch_size]


class MomentumState:
    """Velocity buffers for a set of named parameters."""

    def __init__(self, params: dict[str, np.ndarray], config: SgdConfig):
        self._velocity = {k: np.zeros_like(v) for k, v in params.items()}
        self._mu = config.momentum
        self._eta = config.learning_rate

    def step(self, params: dict[str, np.ndarray], grads: dict[str, np.ndarray]) -> None:
        """Apply one in-place momentum update to every parameter."""
        for name, p in params.items():
            v = self._velocity[name]
            v *= self._mu
            v -= self._eta * grads[name]
            p += v
