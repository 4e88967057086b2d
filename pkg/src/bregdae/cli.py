"""Command-line entry point.

Every subcommand is a thin adapter over one library operation: parse flags,
load inputs, call the operation, write artifacts. Numerical work stays in
the library modules, which are imported lazily so `--threads` can cap BLAS
pools before anything numeric loads.

Exit codes: 0 success, 1 usage error, 2 I/O error, 3 numerical failure.
Precedence for settings: flags beat config-file values beat environment
path overrides beat built-in defaults. Environment overrides exist only
for paths, as BREGDAE_<FLAG> (for example BREGDAE_TRAIN for --train).
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

logger = logging.getLogger(__name__)

# dests that may come from the environment when neither flag nor config set them
_PATH_DESTS = frozenset(
    {"train", "test", "unlabeled", "vocab", "model", "posterior", "ae_model",
     "data", "input", "out", "report", "config"}
)

_LOSS_CHOICES = (
    "squared_euclidean",
    "elementwise_kl",
    "projected_quadratic",
    "marginalized_bregman",
)


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str) -> None:  # argparse calls this on bad usage
        raise UsageError(f"{self.prog}: {message}")


def _comma_floats(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(part) for part in text.split(",") if part.strip())
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from exc


def _comma_names(text: str) -> tuple[str, ...]:
    return tuple(part.strip() for part in text.split(",") if part.strip())


def _add_common(parser: _Parser) -> None:
    parser.add_argument("--config", help="JSON file of flag defaults (flags still win)")
    parser.add_argument("--seed", type=int, default=0, help="master seed; stages derive their own")
    parser.add_argument("--threads", type=int, default=None, help="cap numeric thread pools")
    parser.add_argument(
        "--log-level", default="info", choices=("debug", "info", "warning", "error")
    )


def _add_sgd(parser: _Parser) -> None:
    parser.add_argument("--learning-rate", type=float, default=0.01)
    parser.add_argument("--momentum", type=float, default=0.9)
    parser.add_argument("--epochs", type=int, default=30)
    parser.add_argument("--batch-size", type=int, default=64)


def build_parser() -> _Parser:
    parser = _Parser(prog="bregdae", description=__doc__.split("\n\n")[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("prep", help="prune rare features and normalize counts")
    p.add_argument("--train", help="raw sparse train file")
    p.add_argument("--test", help="raw sparse test file")
    p.add_argument("--unlabeled", help="raw sparse unlabeled file")
    p.add_argument("--vocab", help="token names for the raw files (optional)")
    p.add_argument("--min-df", type=int, default=1, help="keep features in >= this many train docs")
    p.add_argument("--no-normalize", action="store_true", help="prune only, keep raw counts")
    p.add_argument("--out", help="output directory")
    _add_common(p)
    p.set_defaults(func=_cmd_prep)

    p = sub.add_parser("synth", help="generate a planted-polarity synthetic corpus")
    p.add_argument("--n-train", type=int, default=2000)
    p.add_argument("--n-test", type=int, default=1000)
    p.add_argument("--n-unlabeled", type=int, default=0)
    p.add_argument("--n-features", type=int, default=1000)
    p.add_argument("--label-noise", type=float, default=0.05)
    p.add_argument("--out", help="output directory")
    _add_common(p)
    p.set_defaults(func=_cmd_synth)

    p = sub.add_parser("train-svm", help="train a squared-hinge linear classifier")
    p.add_argument("--train", help="prepared sparse train file")
    p.add_argument("--vocab")
    p.add_argument("--svm-lambda", type=float, default=1e-4)
    _add_sgd(p)
    p.add_argument("--out", help="model file to write")
    _add_common(p)
    p.set_defaults(func=_cmd_train_svm)

    p = sub.add_parser("build-posterior", help="diagonal weight posterior from a trained classifier")
    p.add_argument("--train")
    p.add_argument("--vocab")
    p.add_argument("--model", help="trained linear model file")
    p.add_argument("--beta", type=float, required=True)
    p.add_argument("--epsilon-floor", type=float, default=1e-8)
    p.add_argument("--exact-hessian", action="store_true")
    p.add_argument("--out", help="posterior file to write")
    _add_common(p)
    p.set_defaults(func=_cmd_build_posterior)

    p = sub.add_parser("train-ae", help="train a denoising autoencoder")
    p.add_argument("--train")
    p.add_argument("--vocab")
    p.add_argument("--unlabeled", help="extra docs for reconstruction only")
    p.add_argument("--loss", choices=_LOSS_CHOICES, default="squared_euclidean")
    p.add_argument("--posterior", help="posterior file (marginalized_bregman)")
    p.add_argument("--model", help="linear model file (projected_quadratic)")
    p.add_argument("--hidden-size", type=int, default=200)
    p.add_argument("--noise-rate", type=float, default=0.3)
    _add_sgd(p)
    p.add_argument("--out", help="autoencoder file to write")
    _add_common(p)
    p.set_defaults(func=_cmd_train_ae)

    p = sub.add_parser("extract", help="hidden activations of prepared docs as a feature file")
    p.add_argument("--input", help="prepared sparse file")
    p.add_argument("--vocab")
    p.add_argument("--ae-model")
    p.add_argument("--out", help="feature file to write (plus .vocab)")
    _add_common(p)
    p.set_defaults(func=_cmd_extract)

    p = sub.add_parser("evaluate", help="error rate of a linear model on labeled docs")
    p.add_argument("--data", help="labeled sparse file")
    p.add_argument("--vocab")
    p.add_argument("--model")
    p.add_argument("--report", help="write a JSON report here as well")
    _add_common(p)
    p.set_defaults(func=_cmd_evaluate)

    p = sub.add_parser("inspect", help="most activated/deactivated words per filter")
    p.add_argument("--ae-model")
    p.add_argument("--vocab")
    p.add_argument("--k-top", type=int, default=5)
    p.add_argument("--n-filters", type=int, default=8)
    p.add_argument("--out", help="directory for table, records and chart")
    p.add_argument("--no-figures", action="store_true")
    _add_common(p)
    p.set_defaults(func=_cmd_inspect)

    for name in ("pipeline", "compare"):
        p = sub.add_parser(
            name,
            help="run one method end to end" if name == "pipeline"
            else "run several methods side by side",
        )
        p.add_argument("--train", help="prepared sparse train file")
        p.add_argument("--test")
        p.add_argument("--unlabeled")
        p.add_argument("--vocab")
        if name == "pipeline":
            p.add_argument("--method", default="sbdae")
        else:
            p.add_argument("--methods", type=_comma_names, default=("bow", "dae", "sbdae"))
        p.add_argument("--beta-grid", type=_comma_floats, default=(1e4, 1e5, 1e6, 1e7, 1e8))
        p.add_argument("--hidden-size", type=int, default=None)
        p.add_argument("--noise-rate", type=float, default=0.3)
        p.add_argument("--use-unlabeled", action="store_true")
        p.add_argument("--validation-fraction", type=float, default=0.2)
        p.add_argument("--svm-lambda", type=float, default=1e-4)
        p.add_argument("--ae-learning-rate", type=float, default=0.01)
        p.add_argument("--ae-epochs", type=int, default=30)
        p.add_argument("--finetune-epochs", type=int, default=10)
        p.add_argument("--epsilon-floor", type=float, default=1e-8)
        p.add_argument("--exact-hessian", action="store_true")
        _add_sgd(p)
        p.add_argument("--out", help="run directory for artifacts and reports")
        p.add_argument("--no-figures", action="store_true")
        _add_common(p)
        p.set_defaults(func=_cmd_pipeline if name == "pipeline" else _cmd_compare)

    return parser


def _apply_config_and_env(args: argparse.Namespace, parser: _Parser) -> None:
    """Fold config-file values and path env vars under explicit flags."""
    subparser = _find_subparser(parser, args.command)
    defaults = {a.dest: a.default for a in subparser._actions if a.dest != "help"}

    config_path = getattr(args, "config", None) or os.environ.get("BREGDAE_CONFIG")
    if config_path:
        with open(config_path) as fh:
            try:
                values = json.load(fh)
            except json.JSONDecodeError as exc:
                raise UsageError(f"config {config_path}: {exc}") from exc
        if not isinstance(values, dict):
            raise UsageError(f"config {config_path}: expected a JSON object")
        unknown = set(values) - set(defaults)
        if unknown:
            raise UsageError(f"config {config_path}: unknown keys {sorted(unknown)}")
        for key, value in values.items():
            if getattr(args, key) == defaults[key]:
                if isinstance(value, list):
                    value = tuple(value)
                setattr(args, key, value)

    for dest in _PATH_DESTS & set(defaults):
        if getattr(args, dest) is None:
            env = os.environ.get(f"BREGDAE_{dest.upper()}")
            if env:
                setattr(args, dest, env)


def _find_subparser(parser: _Parser, command: str) -> _Parser:
    for action in parser._actions:
        if isinstance(action, argparse._SubParsersAction):
            return action.choices[command]
    raise RuntimeError("no subparsers registered")


def _setup_runtime(args: argparse.Namespace) -> None:
    logging.basicConfig(
        level=getattr(logging, args.log_level.upper()),
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    if args.threads is not None:
        if args.threads < 1:
            raise UsageError("--threads must be positive")
        for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS",
                    "MKL_NUM_THREADS", "NUMEXPR_NUM_THREADS"):
            os.environ[var] = str(args.threads)


# ---------------------------------------------------------------- loaders


def _require_file(path: str | None, flag: str) -> Path:
    if path is None:
        name = flag.lstrip("-").replace("-", "_").upper()
        raise UsageError(f"{flag} is required (flag, config key, or BREGDAE_{name})")
    p = Path(path)
    if not p.is_file():
        raise FileNotFoundError(f"{flag}: no such file: {p}")
    return p


def _require_out(args: argparse.Namespace) -> Path:
    if args.out is None:
        raise UsageError("--out is required (flag, config key, or BREGDAE_OUT)")
    return Path(args.out)


def _load_docs_and_vocab(args: argparse.Namespace, path_attr: str, flag: str):
    from .corpus import parse_sparse, read_vocab

    docs = parse_sparse(_require_file(getattr(args, path_attr), flag))
    vocab = read_vocab(_require_file(args.vocab, "--vocab"))
    return docs, vocab


def _load_xy(args: argparse.Namespace, path_attr: str, flag: str):
    from .corpus import labels_of, to_csr

    docs, vocab = _load_docs_and_vocab(args, path_attr, flag)
    return to_csr(docs, len(vocab)), labels_of(docs), vocab


def _load_corpus(args: argparse.Namespace):
    from .corpus import build_corpus, parse_sparse, read_vocab

    train = parse_sparse(_require_file(args.train, "--train"))
    test = parse_sparse(_require_file(args.test, "--test"))
    unlabeled = []
    if getattr(args, "unlabeled", None):
        unlabeled = parse_sparse(_require_file(args.unlabeled, "--unlabeled"))
    vocab = read_vocab(_require_file(args.vocab, "--vocab"))
    return build_corpus(train, test, unlabeled, vocab)


# ---------------------------------------------------------------- handlers


def _cmd_prep(args: argparse.Namespace) -> int:
    from .corpus import (
        build_corpus, normalize_corpus, parse_sparse, prune_features,
        read_vocab, write_sparse, write_vocab,
    )

    train = parse_sparse(_require_file(args.train, "--train"))
    test = parse_sparse(_require_file(args.test, "--test")) if args.test else []
    unlabeled = parse_sparse(_require_file(args.unlabeled, "--unlabeled")) if args.unlabeled else []
    vocab = read_vocab(_require_file(args.vocab, "--vocab")) if args.vocab else None
    out = _require_out(args)
    corpus = build_corpus(train, test, unlabeled, vocab)
    corpus = prune_features(corpus, args.min_df)
    if not args.no_normalize:
        corpus = normalize_corpus(corpus)

    out.mkdir(parents=True, exist_ok=True)
    write_sparse(corpus.train, out / "train.svm")
    write_vocab(corpus.vocab, out / "vocab.tsv")
    if corpus.test:
        write_sparse(corpus.test, out / "test.svm")
    if corpus.unlabeled:
        write_sparse(corpus.unlabeled, out / "unlabeled.svm")
    print(
        f"prepared {len(corpus.train)} train / {len(corpus.test)} test / "
        f"{len(corpus.unlabeled)} unlabeled docs, {corpus.n_features} features -> {out}"
    )
    return 0


def _cmd_synth(args: argparse.Namespace) -> int:
    from .corpus import write_sparse, write_vocab
    from .synth import make_polarity_corpus

    out = _require_out(args)
    corpus = make_polarity_corpus(
        n_train=args.n_train,
        n_test=args.n_test,
        n_unlabeled=args.n_unlabeled,
        n_features=args.n_features,
        label_noise=args.label_noise,
        seed=args.seed,
    )
    out.mkdir(parents=True, exist_ok=True)
    write_sparse(corpus.train, out / "train.svm")
    write_sparse(corpus.test, out / "test.svm")
    if corpus.unlabeled:
        write_sparse(corpus.unlabeled, out / "unlabeled.svm")
    write_vocab(corpus.vocab, out / "vocab.tsv")
    print(f"wrote raw synthetic corpus to {out} (run `bregdae prep` next)")
    return 0


def _cmd_train_svm(args: argparse.Namespace) -> int:
    from .optim import SgdConfig, derive_seed
    from .svm2 import save_linear_model, train_svm2

    x, y, _ = _load_xy(args, "train", "--train")
    config = SgdConfig(
        learning_rate=args.learning_rate,
        momentum=args.momentum,
        epochs=args.epochs,
        batch_size=args.batch_size,
        seed=derive_seed(args.seed, "svm"),
    )
    model = train_svm2(x, y, args.svm_lambda, config)
    save_linear_model(model, _require_out(args))
    print(f"trained linear model on {x.shape[0]} docs -> {args.out}")
    return 0


def _cmd_build_posterior(args: argparse.Namespace) -> int:
    from .posterior import build_posterior, save_posterior
    from .svm2 import load_linear_model

    x, y, _ = _load_xy(args, "train", "--train")
    model = load_linear_model(_require_file(args.model, "--model"))
    posterior = build_posterior(
        model, x, y, args.beta,
        epsilon_floor=args.epsilon_floor,
        exact_hessian=args.exact_hessian,
    )
    save_posterior(posterior, _require_out(args))
    print(f"built posterior (beta={args.beta:g}) -> {args.out}")
    return 0


def _cmd_train_ae(args: argparse.Namespace) -> int:
    import scipy.sparse as sp

    from .autoencoder import LossSpec, NoiseSpec, init_ae, save_ae_model, train_dae
    from .corpus import to_csr
    from .optim import SgdConfig, derive_seed
    from .posterior import load_posterior
    from .svm2 import load_linear_model

    docs, vocab = _load_docs_and_vocab(args, "train", "--train")
    x = to_csr(docs, len(vocab))
    if args.unlabeled:
        from .corpus import parse_sparse

        extra = parse_sparse(_require_file(args.unlabeled, "--unlabeled"))
        x = sp.vstack([x, to_csr(extra, len(vocab))], format="csr")

    if args.loss == "marginalized_bregman":
        posterior = load_posterior(_require_file(args.posterior, "--posterior"))
        loss = LossSpec.marginalized_bregman(posterior)
    elif args.loss == "projected_quadratic":
        linear = load_linear_model(_require_file(args.model, "--model"))
        loss = LossSpec.projected_quadratic(linear.theta)
    elif args.loss == "elementwise_kl":
        loss = LossSpec.elementwise_kl()
    else:
        loss = LossSpec.squared_euclidean()

    model = init_ae(len(vocab), args.hidden_size, loss, seed=derive_seed(args.seed, "ae_init"))
    noise = NoiseSpec(rate=args.noise_rate, seed=derive_seed(args.seed, "ae_noise"))
    sgd = SgdConfig(
        learning_rate=args.learning_rate,
        momentum=args.momentum,
        epochs=args.epochs,
        batch_size=args.batch_size,
        seed=derive_seed(args.seed, "ae_order"),
    )
    model = train_dae(x, model, noise, sgd)
    save_ae_model(model, _require_out(args))
    print(f"trained {args.loss} autoencoder ({args.hidden_size} units) -> {args.out}")
    return 0


def _cmd_extract(args: argparse.Namespace) -> int:
    import numpy as np

    from .autoencoder import extract_features, load_ae_model
    from .corpus import SparseDoc, Vocabulary, to_csr, write_sparse, write_vocab

    docs, vocab = _load_docs_and_vocab(args, "input", "--input")
    model = load_ae_model(_require_file(args.ae_model, "--ae-model"))
    features = extract_features(model, to_csr(docs, len(vocab)))

    out_docs = []
    for row, doc in zip(features, docs):
        ids = np.flatnonzero(row)
        out_docs.append(SparseDoc(ids, row[ids], doc.label))
    out = _require_out(args)
    write_sparse(out_docs, out)
    k = features.shape[1]
    feature_vocab = Vocabulary(
        tuple(f"h{i:04d}" for i in range(k)),
        np.count_nonzero(features, axis=0).astype(np.int64),
    )
    write_vocab(feature_vocab, out.with_suffix(out.suffix + ".vocab"))
    print(f"extracted {k}-dim features for {len(out_docs)} docs -> {out}")
    return 0


def _cmd_evaluate(args: argparse.Namespace) -> int:
    from .svm2 import error_rate, load_linear_model

    x, y, _ = _load_xy(args, "data", "--data")
    model = load_linear_model(_require_file(args.model, "--model"))
    err = error_rate(model, x, y)
    print(f"error rate {err:.4f} on {x.shape[0]} docs")
    if args.report:
        Path(args.report).write_text(
            json.dumps({"error_rate": err, "n_docs": int(x.shape[0])}, sort_keys=True) + "\n"
        )
    return 0


def _cmd_inspect(args: argparse.Namespace) -> int:
    from .autoencoder import load_ae_model
    from .corpus import read_vocab
    from .filters import render_filter_table, top_words

    model = load_ae_model(_require_file(args.ae_model, "--ae-model"))
    vocab = read_vocab(_require_file(args.vocab, "--vocab"))
    reports = top_words(model, vocab, k_top=args.k_top, n_filters=args.n_filters)
    table = render_filter_table(reports)
    print(table, end="")
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "filters.txt").write_text(table)
        with open(out / "filters.jsonl", "w") as fh:
            for report in reports:
                fh.write(json.dumps(report.to_record(), sort_keys=True) + "\n")
        if not args.no_figures:
            from .figures import filter_chart

            filter_chart(reports, out / "filters.png")
        print(f"wrote filter report to {out}")
    return 0


def _pipeline_config(args: argparse.Namespace, method: str):
    from .pipeline import PipelineConfig

    return PipelineConfig(
        method=method,
        hidden_size=args.hidden_size,
        noise_rate=args.noise_rate,
        beta_grid=tuple(args.beta_grid),
        use_unlabeled=args.use_unlabeled,
        validation_fraction=args.validation_fraction,
        svm_lambda=args.svm_lambda,
        learning_rate=args.learning_rate,
        ae_learning_rate=args.ae_learning_rate,
        momentum=args.momentum,
        epochs=args.epochs,
        ae_epochs=args.ae_epochs,
        finetune_epochs=args.finetune_epochs,
        batch_size=args.batch_size,
        epsilon_floor=args.epsilon_floor,
        exact_hessian=args.exact_hessian,
        seed=args.seed,
    )


def _cmd_pipeline(args: argparse.Namespace) -> int:
    from .pipeline import render_report_table, run

    corpus = _load_corpus(args)
    config = _pipeline_config(args, args.method)
    report = run(corpus, config, out_dir=args.out)
    print(render_report_table([report]), end="")
    if args.out:
        out = Path(args.out)
        (out / "report.txt").write_text(render_report_table([report]))
        if report.beta_errors and not args.no_figures:
            from .figures import beta_curve

            beta_curve(report, out / "beta_curve.png")
        print(f"wrote run artifacts to {out}")
    return 0


def _cmd_compare(args: argparse.Namespace) -> int:
    from .pipeline import compare, render_report_table

    corpus = _load_corpus(args)
    configs = [_pipeline_config(args, method) for method in args.methods]
    reports = compare(corpus, configs)
    table = render_report_table(reports)
    print(table, end="")
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "compare.txt").write_text(table)
        with open(out / "compare.jsonl", "w") as fh:
            for report in reports:
                fh.write(json.dumps(report.to_record(), sort_keys=True) + "\n")
        if not args.no_figures:
            from .figures import error_bar_chart

            error_bar_chart(reports, out / "compare.png")
        print(f"wrote comparison to {out}")
    return 0


# ---------------------------------------------------------------- dispatch


def _exit_code_for(exc: BaseException) -> int:
    from .corpus import ParseError
    from .modelio import FormatError
    from .optim import NumericalError

    seen: list[BaseException] = []
    node: BaseException | None = exc
    while node is not None and node not in seen:
        seen.append(node)
        node = node.__cause__
    for node in seen:
        if isinstance(node, NumericalError):
            return 3
        if isinstance(node, (OSError, ParseError, FormatError)):
            return 2
        if isinstance(node, (UsageError, ValueError)):
            return 1
    return 3


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        _apply_config_and_env(args, parser)
        _setup_runtime(args)
        return args.func(args)
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:
        code = _exit_code_for(exc)
        print(f"error: {exc}", file=sys.stderr)
        logger.debug("traceback", exc_info=exc)
        return code
