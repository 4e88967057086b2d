"""Task-aware document representations from Bregman-loss denoising autoencoders.

Train a linear squared-hinge classifier on normalized bag-of-words, read a
diagonal Gaussian posterior off its weights, and use the induced Bregman
divergence as the reconstruction loss of a denoising autoencoder. Hidden
activations then serve as document features for a fresh linear classifier.
"""

from .autoencoder import (
    LOSS_KINDS,
    AeModel,
    FinetunedModel,
    LossSpec,
    NoiseSpec,
    corrupt,
    decode,
    encode,
    extract_features,
    finetune_softmax,
    init_ae,
    load_ae_model,
    reconstruction_loss,
    save_ae_model,
    train_dae,
)
from .corpus import (
    Corpus,
    ParseError,
    SparseDoc,
    Vocabulary,
    build_corpus,
    compute_doc_freq,
    normalize,
    normalize_corpus,
    parse_sparse,
    prune_features,
    read_vocab,
    to_csr,
    write_sparse,
    write_vocab,
)
from .filters import FilterReport, render_filter_table, top_words
from .optim import NumericalError, SgdConfig, derive_seed
from .pipeline import (
    METHODS,
    PipelineConfig,
    RunReport,
    StageError,
    compare,
    render_report_table,
    run,
    select_beta,
)
from .posterior import Posterior, build_posterior, load_posterior, save_posterior, sigma_diag
from .svm2 import (
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
from .synth import make_polarity_corpus, polarity_tokens

__version__ = "0.1.0"

__all__ = [
    "AeModel",
    "Corpus",
    "FilterReport",
    "FinetunedModel",
    "LinearModel",
    "LossSpec",
    "LOSS_KINDS",
    "METHODS",
    "NoiseSpec",
    "NumericalError",
    "ParseError",
    "PipelineConfig",
    "Posterior",
    "RunReport",
    "SgdConfig",
    "SparseDoc",
    "StageError",
    "Vocabulary",
    "build_corpus",
    "build_posterior",
    "compare",
    "compute_doc_freq",
    "corrupt",
    "decode",
    "derive_seed",
    "encode",
    "error_rate",
    "extract_features",
    "finetune_softmax",
    "init_ae",
    "load_ae_model",
    "load_linear_model",
    "load_posterior",
    "make_polarity_corpus",
    "margins",
    "normalize",
    "normalize_corpus",
    "parse_sparse",
    "polarity_tokens",
    "predict",
    "prune_features",
    "read_vocab",
    "reconstruction_loss",
    "render_filter_table",
    "render_report_table",
    "run",
    "save_ae_model",
    "save_linear_model",
    "save_posterior",
    "select_beta",
    "sigma_diag",
    "svm2_grad",
    "svm2_loss",
    "to_csr",
    "top_words",
    "train_dae",
    "train_svm2",
    "write_sparse",
    "write_vocab",
    "__version__",
]
