"""Synthetic polarity corpus with planted signal words.

Feature document frequencies follow a truncated power law (a long head of
common background words and a tail of rare ones). Twenty designated
low-frequency features act as polarity words: every document draws one or
two words from its class's set, and the label equals the class up to a
small flip rate. Background words are label-independent, so all the signal
lives in the planted features. Tokens are named `pos00`..`pos09`,
`neg00`..`neg09` and `bg<id>`.
"""

from __future__ import annotations

import numpy as np

from .corpus import Corpus, SparseDoc, Vocabulary, build_corpus

N_POLAR = 20  # ten per class


def _doc_frequencies(n_features: int) -> np.ndarray:
    ranks = np.arange(1, n_features + 1, dtype=np.float64)
    return np.minimum(0.9, 1.2 / ranks**0.8)


def _sample_doc(
    rng: np.random.Generator,
    bg_prob: np.ndarray,
    pos_ids: np.ndarray,
    neg_ids: np.ndarray,
    label_noise: float,
    labeled: bool,
) -> SparseDoc:
    cls = 1 if rng.random() < 0.5 else -1
    word_pool = pos_ids if cls == 1 else neg_ids
    n_words = 1 + rng.binomial(1, 0.35)
    words = rng.choice(word_pool, size=n_words, replace=False)
    bg = np.flatnonzero(rng.random(bg_prob.size) < bg_prob)
    ids = np.concatenate([bg, words])
    counts = np.concatenate(
        [1 + rng.poisson(0.6, size=bg.size), 1 + rng.poisson(0.4, size=words.size)]
    ).astype(np.float64)
    order = np.argsort(ids)
    label = None
    if labeled:
        label = cls if rng.random() >= label_noise else -cls
    return SparseDoc(ids[order], counts[order], label)


def make_polarity_corpus(
    n_train: int = 2000,
    n_test: int = 1000,
    n_unlabeled: int = 0,
    n_features: int = 1000,
    label_noise: float = 0.05,
    seed: int = 0,
) -> Corpus:
    """Generate raw-count train/test/unlabeled splits with planted polarity."""
    if n_features < 3 * N_POLAR:
        raise ValueError("n_features is too small to hide the planted words")
    rng = np.random.default_rng(seed)
    freq = _doc_frequencies(n_features)
    planted = rng.choice(
        np.arange(n_features // 3, n_features), size=N_POLAR, replace=False
    )
    planted.sort()
    pos_ids, neg_ids = planted[::2].copy(), planted[1::2].copy()
    bg_prob = freq.copy()
    bg_prob[planted] = 0.0

    tokens = [f"bg{i}" for i in range(n_features)]
    for j, fid in enumerate(pos_ids):
        tokens[fid] = f"pos{j:02d}"
    for j, fid in enumerate(neg_ids):
        tokens[fid] = f"neg{j:02d}"
    vocab = Vocabulary(tuple(tokens), np.zeros(n_features, dtype=np.int64))

    def draw(count: int, labeled: bool) -> list[SparseDoc]:
        return [
            _sample_doc(rng, bg_prob, pos_ids, neg_ids, label_noise, labeled)
            for _ in range(count)
        ]

    return build_corpus(
        draw(n_train, True), draw(n_test, True), draw(n_unlabeled, False), vocab
    )


def polarity_tokens() -> tuple[str, ...]:
    """The token names of the planted polarity words."""
    return tuple(f"pos{j:02d}" for j in range(N_POLAR // 2)) + tuple(
        f"neg{j:02d}" for j in range(N_POLAR // 2)
    )
