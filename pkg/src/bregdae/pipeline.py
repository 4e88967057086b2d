"""End-to-end training pipelines and method comparison.

A pipeline run goes: train a squared-hinge SVM on normalized bag-of-words,
turn its weights into a diagonal Gaussian posterior, train a denoising
autoencoder whose reconstruction loss is chosen by the method, extract
hidden activations as features, and train a fresh SVM on those features.
Baselines reuse the same stages with a different loss or skip stages
entirely. All randomness derives from one master seed, one stream per
stage, so stage-by-stage runs reproduce a single uninterrupted run.
"""

from __future__ import annotations

import dataclasses
import json
import logging
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from .autoencoder import (
    AeModel,
    FinetunedModel,
    LossSpec,
    NoiseSpec,
    extract_features,
    finetune_softmax,
    init_ae,
    save_ae_model,
    train_dae,
)
from .corpus import Corpus, labels_of, to_csr
from .optim import SgdConfig, derive_seed, stage_rng
from .posterior import build_posterior, save_posterior
from .svm2 import error_rate, save_linear_model, train_svm2

logger = logging.getLogger(__name__)

METHODS = ("bow", "dae", "dae+", "sbdae", "sbdae+")
DEFAULT_BETA_GRID = (1e4, 1e5, 1e6, 1e7, 1e8)

# methods whose loss needs the classifier posterior
_POSTERIOR_METHODS = frozenset({"sbdae", "sbdae+"})
# methods with a supervised finetuning pass after reconstruction training
_FINETUNED_METHODS = frozenset({"dae+", "sbdae+"})


@dataclass(frozen=True)
class PipelineConfig:
    """Everything a run needs besides the corpus itself."""

    method: str = "sbdae"
    hidden_size: int | None = None
    noise_rate: float = 0.3
    beta_grid: tuple[float, ...] = DEFAULT_BETA_GRID
    use_unlabeled: bool = False
    validation_fraction: float = 0.2
    svm_lambda: float = 1e-4
    learning_rate: float = 0.01
    ae_learning_rate: float = 0.01
    momentum: float = 0.9
    epochs: int = 30
    ae_epochs: int = 30
    finetune_epochs: int = 10
    batch_size: int = 64
    epsilon_floor: float = 1e-8
    exact_hessian: bool = False
    seed: int = 0

    def __post_init__(self) -> None:
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}; expected one of {METHODS}")
        if self.hidden_size is not None and self.hidden_size < 1:
            raise ValueError("hidden_size must be positive")
        if not 0.0 <= self.noise_rate < 1.0:
            raise ValueError("noise_rate must be in [0, 1)")
        if not 0.0 < self.validation_fraction < 1.0:
            raise ValueError("validation_fraction must be in (0, 1)")
        if self.svm_lambda < 0:
            raise ValueError("svm_lambda must be nonnegative")
        if self.method in _POSTERIOR_METHODS:
            if not self.beta_grid:
                raise ValueError(f"beta_grid must be nonempty for method {self.method!r}")
            if any(b <= 0 for b in self.beta_grid):
                raise ValueError("beta_grid values must be positive")
        object.__setattr__(self, "beta_grid", tuple(float(b) for b in self.beta_grid))

    def resolved_hidden_size(self) -> int:
        if self.hidden_size is not None:
            return self.hidden_size
        return 2000 if self.method == "dae" else 200

    def sgd(self, stage: str, epochs: int, learning_rate: float) -> SgdConfig:
        return SgdConfig(
            learning_rate=learning_rate,
            momentum=self.momentum,
            epochs=epochs,
            batch_size=self.batch_size,
            seed=derive_seed(self.seed, stage),
        )


@dataclass(frozen=True)
class RunReport:
    """Outcome of one pipeline run."""

    method: str
    chosen_beta: float | None
    train_error: float
    test_error: float
    seconds: float
    config: dict
    beta_errors: tuple[tuple[float, float], ...] = ()

    def __post_init__(self) -> None:
        for name, value in (("train_error", self.train_error), ("test_error", self.test_error)):
            if not 0.0 <= value <= 1.0:
                raise ValueError(f"{name} must be in [0, 1], got {value}")

    def to_record(self, include_timing: bool = False) -> dict:
        """Structured row; timing is opt-in so artifacts stay reproducible."""
        record = {
            "method": self.method,
            "chosen_beta": self.chosen_beta,
            "train_error": self.train_error,
            "test_error": self.test_error,
            "beta_errors": [list(pair) for pair in self.beta_errors],
            # tuples become lists so the record round-trips through json
            "config": {
                k: list(v) if isinstance(v, tuple) else v for k, v in self.config.items()
            },
        }
        if include_timing:
            record["seconds"] = self.seconds
        return record


class StageError(RuntimeError):
    """A pipeline stage failed; the message names the stage."""


def _matrices(corpus: Corpus) -> tuple[sp.csr_matrix, np.ndarray, sp.csr_matrix, np.ndarray]:
    d = len(corpus.vocab)
    x_train = to_csr(corpus.train, d)
    x_test = to_csr(corpus.test, d)
    return x_train, labels_of(corpus.train), x_test, labels_of(corpus.test)


def _ae_inputs(corpus: Corpus, x_train: sp.csr_matrix, config: PipelineConfig) -> sp.csr_matrix:
    if config.use_unlabeled and corpus.unlabeled:
        x_extra = to_csr(corpus.unlabeled, len(corpus.vocab))
        return sp.vstack([x_train, x_extra], format="csr")
    return x_train


def _run_stage(name: str, fn, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except Exception as exc:
        raise StageError(f"stage {name!r} failed: {exc}") from exc


def _train_encoder(
    x_ae: sp.csr_matrix,
    loss: LossSpec,
    config: PipelineConfig,
) -> AeModel:
    d = x_ae.shape[1]
    model = init_ae(d, config.resolved_hidden_size(), loss, seed=derive_seed(config.seed, "ae_init"))
    noise = NoiseSpec(rate=config.noise_rate, seed=derive_seed(config.seed, "ae_noise"))
    sgd = config.sgd("ae_order", config.ae_epochs, config.ae_learning_rate)
    return train_dae(x_ae, model, noise, sgd)


def _loss_for(
    config: PipelineConfig,
    x_train: sp.csr_matrix,
    y_train: np.ndarray,
    beta: float | None,
    artifacts: dict | None,
) -> LossSpec:
    if config.method in ("dae", "dae+"):
        return LossSpec.squared_euclidean()
    svm_cfg = config.sgd("svm", config.epochs, config.learning_rate)
    linear = _run_stage("train_svm", train_svm2, x_train, y_train, config.svm_lambda, svm_cfg)
    posterior = _run_stage(
        "build_posterior",
        build_posterior,
        linear,
        x_train,
        y_train,
        beta,
        epsilon_floor=config.epsilon_floor,
        exact_hessian=config.exact_hessian,
    )
    if artifacts is not None:
        artifacts["linear_model"] = linear
        artifacts["posterior"] = posterior
    return LossSpec.marginalized_bregman(posterior)


def _features_and_errors(
    encoder,
    x_train: sp.csr_matrix,
    y_train: np.ndarray,
    x_test: sp.csr_matrix,
    y_test: np.ndarray,
    config: PipelineConfig,
) -> tuple[float, float]:
    f_train = _run_stage("extract", extract_features, encoder, x_train)
    f_test = _run_stage("extract", extract_features, encoder, x_test)
    svm_cfg = config.sgd("final_svm", config.epochs, config.learning_rate)
    final = _run_stage("final_svm", train_svm2, f_train, y_train, config.svm_lambda, svm_cfg)
    return error_rate(final, f_train, y_train), error_rate(final, f_test, y_test)


def _run_on_matrices(
    corpus: Corpus,
    x_train: sp.csr_matrix,
    y_train: np.ndarray,
    x_test: sp.csr_matrix,
    y_test: np.ndarray,
    config: PipelineConfig,
    beta: float | None,
    artifacts: dict | None = None,
) -> tuple[float, float]:
    if config.method == "bow":
        svm_cfg = config.sgd("svm", config.epochs, config.learning_rate)
        model = _run_stage("train_svm", train_svm2, x_train, y_train, config.svm_lambda, svm_cfg)
        if artifacts is not None:
            artifacts["linear_model"] = model
        return error_rate(model, x_train, y_train), error_rate(model, x_test, y_test)
    loss = _loss_for(config, x_train, y_train, beta, artifacts)
    x_ae = _ae_inputs(corpus, x_train, config)
    encoder = _run_stage("train_ae", _train_encoder, x_ae, loss, config)
    if artifacts is not None:
        artifacts["ae_model"] = encoder
    if config.method in _FINETUNED_METHODS:
        sgd = config.sgd("finetune", config.finetune_epochs, config.learning_rate)
        encoder = _run_stage("finetune", finetune_softmax, encoder, x_train, y_train, sgd)
    return _features_and_errors(encoder, x_train, y_train, x_test, y_test, config)


def select_beta(corpus: Corpus, config: PipelineConfig) -> tuple[float, list[tuple[float, float]]]:
    """Pick beta by error on a held-out slice of train; ties prefer larger beta."""
    if config.method not in _POSTERIOR_METHODS:
        raise ValueError(f"beta selection does not apply to method {config.method!r}")
    if len(config.beta_grid) == 1:
        return config.beta_grid[0], [(config.beta_grid[0], float("nan"))]
    x_train, y_train, _, _ = _matrices(corpus)
    n = x_train.shape[0]
    n_val = int(round(config.validation_fraction * n))
    if n_val < 1 or n - n_val < 1:
        raise ValueError(f"validation split is degenerate: {n} docs, {n_val} held out")
    order = stage_rng(config.seed, "beta_split").permutation(n)
    val_idx, fit_idx = order[:n_val], order[n_val:]
    x_fit, y_fit = x_train[fit_idx], y_train[fit_idx]
    x_val, y_val = x_train[val_idx], y_train[val_idx]

    errors: list[tuple[float, float]] = []
    for beta in sorted(config.beta_grid):
        _, val_error = _run_on_matrices(corpus, x_fit, y_fit, x_val, y_val, config, beta)
        errors.append((beta, val_error))
        logger.info("beta=%.3g validation error %.4f", beta, val_error)
    chosen = min(errors, key=lambda pair: (pair[1], -pair[0]))[0]
    return chosen, errors


def run(corpus: Corpus, config: PipelineConfig, out_dir: str | Path | None = None) -> RunReport:
    """Execute the configured method end to end on a prepared corpus."""
    start = time.perf_counter()
    x_train, y_train, x_test, y_test = _matrices(corpus)

    chosen_beta: float | None = None
    beta_errors: list[tuple[float, float]] = []
    if config.method in _POSTERIOR_METHODS:
        if len(config.beta_grid) == 1:
            chosen_beta = config.beta_grid[0]
        else:
            chosen_beta, beta_errors = _run_stage("select_beta", select_beta, corpus, config)
            logger.info("chose beta=%.3g", chosen_beta)

    artifacts: dict = {}
    train_error, test_error = _run_on_matrices(
        corpus, x_train, y_train, x_test, y_test, config, chosen_beta, artifacts
    )
    report = RunReport(
        method=config.method,
        chosen_beta=chosen_beta,
        train_error=train_error,
        test_error=test_error,
        seconds=time.perf_counter() - start,
        config=dataclasses.asdict(config),
        beta_errors=tuple(beta_errors),
    )
    if out_dir is not None:
        _write_run_dir(Path(out_dir), report, artifacts)
    return report


def _write_run_dir(out_dir: Path, report: RunReport, artifacts: dict) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    files: dict[str, str] = {}
    if "linear_model" in artifacts:
        save_linear_model(artifacts["linear_model"], out_dir / "linear_model.bdz")
        files["linear_model"] = "linear_model.bdz"
    if "posterior" in artifacts:
        save_posterior(artifacts["posterior"], out_dir / "posterior.bdz")
        files["posterior"] = "posterior.bdz"
    if "ae_model" in artifacts:
        save_ae_model(artifacts["ae_model"], out_dir / "ae_model.bdz")
        files["ae_model"] = "ae_model.bdz"
    report_path = out_dir / "report.json"
    report_path.write_text(json.dumps(report.to_record(), indent=2, sort_keys=True) + "\n")
    files["report"] = "report.json"
    manifest = {"kind": "bregdae-run", "method": report.method, "files": files}
    (out_dir / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")


def compare(corpus: Corpus, configs: list[PipelineConfig]) -> list[RunReport]:
    """Run several configurations on one corpus, one report per config."""
    if not configs:
        raise ValueError("compare needs at least one configuration")
    return [run(corpus, config) for config in configs]


def render_report_table(reports: list[RunReport]) -> str:
    """Aligned text table, one row per run."""
    header = ("method", "beta", "train error", "test error", "seconds")
    rows = [header]
    for r in reports:
        beta = "-" if r.chosen_beta is None else f"{r.chosen_beta:.3g}"
        rows.append((r.method, beta, f"{r.train_error:.4f}", f"{r.test_error:.4f}", f"{r.seconds:.1f}"))
    widths = [max(len(row[i]) for row in rows) for i in range(len(header))]
    lines = ["  ".join(cell.ljust(widths[i]) for i, cell in enumerate(row)).rstrip() for row in rows]
    lines.insert(1, "  ".join("-" * w for w in widths))
    return "\n".join(lines) + "\n"
