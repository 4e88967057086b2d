"""Inspection of learned filters: the words each hidden unit reacts to.

A filter is one row of the encoder weight matrix. Its largest entries name
the words that most activate the unit, its smallest the words that most
deactivate it.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .corpus import Vocabulary


@dataclass(frozen=True)
class FilterReport:
    filter_index: int
    top_activated: tuple[tuple[str, float], ...]
    top_deactivated: tuple[tuple[str, float], ...]

    def to_record(self) -> dict:
        return {
            "filter": self.filter_index,
            "activated": [[t, w] for t, w in self.top_activated],
            "deactivated": [[t, w] for t, w in self.top_deactivated],
        }


def top_words(
    model, vocab: Vocabulary, k_top: int = 5, n_filters: int = 8
) -> list[FilterReport]:
    """Strongest positive and negative weights of the first n_filters rows.

    Ties are broken toward the lower feature index. Pure function of the
    weight matrix and the vocabulary.
    """
    W = np.asarray(model.W, np.float64)
    k, d = W.shape
    if not 1 <= n_filters <= k:
        raise ValueError(f"n_filters must lie in [1, {k}]")
    if not 1 <= k_top <= d:
        raise ValueError(f"k_top must lie in [1, {d}]")
    if d != len(vocab):
        raise ValueError("vocabulary size does not match the weight matrix")
    idx = np.arange(d)
    reports = []
    for f in range(n_filters):
        row = W[f]
        desc = np.lexsort((idx, -row))[:k_top]
        asc = np.lexsort((idx, row))[:k_top]
        reports.append(
            FilterReport(
                f,
                tuple((vocab.tokens[j], float(row[j])) for j in desc),
                tuple((vocab.tokens[j], float(row[j])) for j in asc),
            )
        )
    return reports


def render_filter_table(reports: list[FilterReport]) -> str:
    """Aligned text table: one column per filter, activated block over deactivated."""
    if not reports:
        return ""
    k_top = len(reports[0].top_activated)
    headers = [f"filter {r.filter_index}" for r in reports]
    act_rows = [
        [r.top_activated[i][0] for r in reports] for i in range(k_top)
    ]
    deact_rows = [
        [r.top_deactivated[i][0] for r in reports] for i in range(k_top)
    ]
    widths = [
        max(len(headers[c]), *(len(row[c]) for row in act_rows + deact_rows))
        for c in range(len(reports))
    ]

    def fmt(cells: list[str]) -> str:
        return "  ".join(c.ljust(w) for c, w in zip(cells, widths)).rstrip()

    rule = "  ".join("-" * w for w in widths)
    lines = [fmt(headers), rule]
    lines += [fmt(row) for row in act_rows]
    lines.append(rule)
    lines += [fmt(row) for row in deact_rows]
    return "\n".join(lines) + "\n"
