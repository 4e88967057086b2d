"""Sparse bag-of-words corpus handling.

Documents travel as sparse (feature id, value) pairs with an optional binary
label. The on-disk format is one document per line:

    label idx:val idx:val ...

where `label` is `+1`, `-1` or `?` (unlabeled) and indices are 1-based and
strictly increasing. Internally indices are 0-based. A vocabulary file maps
feature ids to token strings and training-split document frequencies, one
`id<TAB>token<TAB>doc_freq` row per feature.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
import scipy.sparse as sp

logger = logging.getLogger(__name__)


class ParseError(ValueError):
    """A data file violated the sparse line format."""


@dataclass(frozen=True)
class SparseDoc:
    """One document: parallel id/value arrays plus an optional label in {+1, -1}."""

    ids: np.ndarray
    values: np.ndarray
    label: int | None = None

    def __post_init__(self) -> None:
        ids = np.asarray(self.ids, dtype=np.int64)
        values = np.asarray(self.values, dtype=np.float64)
        object.__setattr__(self, "ids", ids)
        object.__setattr__(self, "values", values)
        if ids.shape != values.shape or ids.ndim != 1:
            raise ValueError("ids and values must be parallel 1-d arrays")
        if ids.size and np.any(np.diff(ids) <= 0):
            raise ValueError("feature ids must be strictly increasing")
        if np.any(values < 0):
            raise ValueError("feature values must be nonnegative")
        if self.label not in (None, 1, -1):
            raise ValueError("label must be +1, -1 or None")

    @property
    def nnz(self) -> int:
        return int(self.ids.size)


@dataclass(frozen=True)
class Vocabulary:
    """Bijection between tokens and dense feature ids, with train doc frequencies."""

    tokens: tuple[str, ...]
    doc_freq: np.ndarray
    token_to_id: dict[str, int] = field(repr=False, default_factory=dict)

    def __post_init__(self) -> None:
        df = np.asarray(self.doc_freq, dtype=np.int64)
        object.__setattr__(self, "doc_freq", df)
        if len(self.tokens) != df.size:
            raise ValueError("doc_freq length must match token count")
        if not self.token_to_id:
            object.__setattr__(
                self, "token_to_id", {t: i for i, t in enumerate(self.tokens)}
            )
        if len(self.token_to_id) != len(self.tokens):
            raise ValueError("tokens must be unique")

    def __len__(self) -> int:
        return len(self.tokens)

    @classmethod
    def placeholder(cls, size: int, doc_freq: np.ndarray | None = None) -> "Vocabulary":
        """Vocabulary with synthetic `w<i>` tokens (1-based, matching file indices)."""
        if doc_freq is None:
            doc_freq = np.zeros(size, dtype=np.int64)
        return cls(tuple(f"w{i + 1}" for i in range(size)), doc_freq)


@dataclass(frozen=True)
class Corpus:
    """Train/test/unlabeled splits sharing one vocabulary."""

    vocab: Vocabulary
    train: tuple[SparseDoc, ...]
    test: tuple[SparseDoc, ...]
    unlabeled: tuple[SparseDoc, ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "train", tuple(self.train))
        object.__setattr__(self, "test", tuple(self.test))
        object.__setattr__(self, "unlabeled", tuple(self.unlabeled))
        d = len(self.vocab)
        for split_name, docs, labeled in (
            ("train", self.train, True),
            ("test", self.test, True),
            ("unlabeled", self.unlabeled, False),
        ):
            for i, doc in enumerate(docs):
                if labeled and doc.label is None:
                    raise ValueError(f"{split_name} doc {i} is missing a label")
                if not labeled and doc.label is not None:
                    raise ValueError(f"unlabeled doc {i} carries a label")
                if doc.nnz and doc.ids[-1] >= d:
                    raise ValueError(
                        f"{split_name} doc {i} references feature {doc.ids[-1]} "
                        f"but the vocabulary has {d} entries"
                    )

    @property
    def n_features(self) -> int:
        return len(self.vocab)


def _parse_label(token: str, lineno: int) -> int | None:
    if token == "?":
        return None
    if token in ("+1", "1"):
        return 1
    if token == "-1":
        return -1
    raise ParseError(f"line {lineno}: label must be +1, -1 or ?, got {token!r}")


def parse_sparse(path: str | Path) -> list[SparseDoc]:
    """Parse a sparse document file.

    Raises ParseError naming the offending line for malformed entries,
    duplicate or non-increasing indices, and negative values. Blank lines
    are ignored.
    """
    docs: list[SparseDoc] = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line:
                continue
            fields = line.split()
            label = _parse_label(fields[0], lineno)
            ids = np.empty(len(fields) - 1, dtype=np.int64)
            values = np.empty(len(fields) - 1, dtype=np.float64)
            prev = 0
            for k, item in enumerate(fields[1:]):
                idx_s, sep, val_s = item.partition(":")
                if not sep:
                    raise ParseError(f"line {lineno}: expected idx:val, got {item!r}")
                try:
                    idx = int(idx_s)
                    val = float(val_s)
                except ValueError as exc:
                    raise ParseError(f"line {lineno}: bad entry {item!r}") from exc
                if idx < 1:
                    raise ParseError(f"line {lineno}: index {idx} is not 1-based")
                if idx == prev:
                    raise ParseError(f"line {lineno}: duplicate index {idx}")
                if idx < prev:
                    raise ParseError(
                        f"line {lineno}: indices must be strictly increasing "
                        f"({idx} after {prev})"
                    )
                if not np.isfinite(val) or val < 0:
                    raise ParseError(f"line {lineno}: value {val_s!r} is not a "
                                     "finite nonnegative real")
                ids[k] = idx - 1
                values[k] = val
                prev = idx
            docs.append(SparseDoc(ids, values, label))
    return docs


def _format_value(v: float) -> str:
    # integral values print without a trailing .0; repr round-trips the rest
    return str(int(v)) if float(v).is_integer() else repr(float(v))


def write_sparse(docs: Iterable[SparseDoc], path: str | Path) -> None:
    """Write documents in the same 1-based sparse line format parse_sparse reads."""
    with open(path, "w", encoding="utf-8") as fh:
        for doc in docs:
            label = "?" if doc.label is None else f"{doc.label:+d}"
            entries = " ".join(
                f"{i + 1}:{_format_value(v)}" for i, v in zip(doc.ids, doc.values)
            )
            fh.write(f"{label} {entries}".rstrip() + "\n")


def write_vocab(vocab: Vocabulary, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for i, token in enumerate(vocab.tokens):
            fh.write(f"{i}\t{token}\t{int(vocab.doc_freq[i])}\n")


def read_vocab(path: str | Path) -> Vocabulary:
    """Read an `id<TAB>token[<TAB>doc_freq]` vocabulary file."""
    tokens: list[str] = []
    freqs: list[int] = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.rstrip("\n")
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) not in (2, 3):
                raise ParseError(f"line {lineno}: expected id<TAB>token[<TAB>df]")
            try:
                idx = int(parts[0])
            except ValueError as exc:
                raise ParseError(f"line {lineno}: bad id {parts[0]!r}") from exc
            if idx != len(tokens):
                raise ParseError(f"line {lineno}: ids must be dense and ascending")
            tokens.append(parts[1])
            freqs.append(int(parts[2]) if len(parts) == 3 else 0)
    return Vocabulary(tuple(tokens), np.asarray(freqs, dtype=np.int64))


def compute_doc_freq(docs: Sequence[SparseDoc], n_features: int) -> np.ndarray:
    """Per-feature count of documents containing the feature."""
    df = np.zeros(n_features, dtype=np.int64)
    for i, doc in enumerate(docs):
        if doc.nnz and doc.ids[-1] >= n_features:
            raise ValueError(
                f"doc {i} references feature {doc.ids[-1]}, "
                f"but the vocabulary has {n_features}"
            )
        df[doc.ids] += 1
    return df


def build_corpus(
    train: Sequence[SparseDoc],
    test: Sequence[SparseDoc] = (),
    unlabeled: Sequence[SparseDoc] = (),
    vocab: Vocabulary | None = None,
) -> Corpus:
    """Assemble a corpus, inferring a placeholder vocabulary when none is given.

    Document frequencies are always recomputed from the train split.
    """
    if vocab is None:
        d = 0
        for doc in (*train, *test, *unlabeled):
            if doc.nnz:
                d = max(d, int(doc.ids[-1]) + 1)
        vocab = Vocabulary.placeholder(d)
    df = compute_doc_freq(train, len(vocab))
    vocab = replace(vocab, doc_freq=df)
    return Corpus(vocab, tuple(train), tuple(test), tuple(unlabeled))


def _remap_docs(
    docs: Sequence[SparseDoc], new_id: np.ndarray, split: str
) -> tuple[SparseDoc, ...]:
    out: list[SparseDoc] = []
    dropped = 0
    for doc in docs:
        mapped = new_id[doc.ids]
        keep = mapped >= 0
        if not keep.any():
            dropped += 1
            continue
        out.append(SparseDoc(mapped[keep], doc.values[keep], doc.label))
    if dropped:
        logger.warning(
            "prune_features dropped %d all-zero %s documents", dropped, split
        )
    return tuple(out)


def prune_features(corpus: Corpus, min_df: int) -> Corpus:
    """Drop features whose train doc frequency is below min_df.

    Surviving features are reindexed densely in their original order, and the
    vocabulary follows the same map. Documents left with no features are
    dropped with a warning.
    """
    if min_df < 1:
        raise ValueError("min_df must be a positive integer")
    df = compute_doc_freq(corpus.train, corpus.n_features)
    keep = df >= min_df
    n_kept = int(keep.sum())
    if n_kept == 0:
        raise ValueError(f"min_df={min_df} removes every feature")
    new_id = np.full(corpus.n_features, -1, dtype=np.int64)
    new_id[keep] = np.arange(n_kept)
    vocab = Vocabulary(
        tuple(t for t, k in zip(corpus.vocab.tokens, keep) if k), df[keep]
    )
    return Corpus(
        vocab,
        _remap_docs(corpus.train, new_id, "train"),
        _remap_docs(corpus.test, new_id, "test"),
        _remap_docs(corpus.unlabeled, new_id, "unlabeled"),
    )


def normalize(doc: SparseDoc) -> SparseDoc:
    """Map raw counts c to log(1 + c) / max_j log(1 + c_j).

    The sparsity pattern is unchanged, the largest entry becomes exactly 1,
    and every stored entry lands in (0, 1].
    """
    if doc.nnz == 0 or not np.any(doc.values > 0):
        raise ValueError("cannot normalize a document with no positive entries")
    scaled = np.log1p(doc.values)
    return SparseDoc(doc.ids, scaled / scaled.max(), doc.label)


def normalize_corpus(corpus: Corpus) -> Corpus:
    """Apply `normalize` to every document in every split."""
    return Corpus(
        corpus.vocab,
        tuple(normalize(d) for d in corpus.train),
        tuple(normalize(d) for d in corpus.test),
        tuple(normalize(d) for d in corpus.unlabeled),
    )


def to_csr(docs: Sequence[SparseDoc], n_features: int) -> sp.csr_matrix:
    """Stack documents into an n x d CSR matrix."""
    indptr = np.zeros(len(docs) + 1, dtype=np.int64)
    for i, doc in enumerate(docs):
        indptr[i + 1] = indptr[i] + doc.nnz
    if docs:
        indices = np.concatenate([doc.ids for doc in docs])
        data = np.concatenate([doc.values for doc in docs])
    else:
        indices = np.zeros(0, dtype=np.int64)
        data = np.zeros(0, dtype=np.float64)
    return sp.csr_matrix((data, indices, indptr), shape=(len(docs), n_features))


def labels_of(docs: Sequence[SparseDoc]) -> np.ndarray:
    """Label vector in {+1, -1}; raises if any document is unlabeled."""
    y = np.empty(len(docs), dtype=np.float64)
    for i, doc in enumerate(docs):
        if doc.label is None:
            raise ValueError(f"doc {i} is unlabeled")
        y[i] = doc.label
    return y
