"""Chart rendering for reports.

Everything here writes PNG files next to the text output; nothing opens a
display. Charts cover the three things worth eyeballing after a run: test
error per method, validation error across the beta grid, and the strongest
word weights of individual filters.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from .filters import FilterReport
from .pipeline import RunReport


def error_bar_chart(reports: list[RunReport], path: str | Path) -> Path:
    """Bar chart of test error per run, annotated with the chosen beta."""
    if not reports:
        raise ValueError("no reports to plot")
    path = Path(path)
    labels = []
    for r in reports:
        label = r.method
        if r.chosen_beta is not None:
            label += f"\nbeta={r.chosen_beta:.0e}"
        labels.append(label)
    errors = [r.test_error for r in reports]

    fig, ax = plt.subplots(figsize=(1.6 + 1.2 * len(reports), 4.0))
    bars = ax.bar(range(len(reports)), errors, color="#4878a8")
    ax.bar_label(bars, fmt="%.3f", padding=2)
    ax.set_xticks(range(len(reports)), labels)
    ax.set_ylabel("test error")
    ax.set_ylim(0, max(errors) * 1.25 if max(errors) > 0 else 1.0)
    ax.set_title("Test error by method")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def beta_curve(report: RunReport, path: str | Path) -> Path:
    """Validation error against beta on a log axis, chosen beta marked."""
    if not report.beta_errors:
        raise ValueError("report has no beta selection trace")
    path = Path(path)
    betas = [b for b, _ in report.beta_errors]
    errors = [e for _, e in report.beta_errors]

    fig, ax = plt.subplots(figsize=(5.5, 4.0))
    ax.semilogx(betas, errors, marker="o", color="#4878a8")
    if report.chosen_beta is not None:
        ax.axvline(report.chosen_beta, color="#b84848", linestyle="--", label="chosen")
        ax.legend()
    ax.set_xlabel("beta")
    ax.set_ylabel("validation error")
    ax.set_title(f"Beta selection ({report.method})")
    ax.grid(True, which="both", alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def filter_chart(reports: list[FilterReport], path: str | Path) -> Path:
    """Horizontal bars of the top activated/deactivated words per filter."""
    if not reports:
        raise ValueError("no filters to plot")
    path = Path(path)
    n = len(reports)
    ncols = min(n, 4)
    nrows = (n + ncols - 1) // ncols
    fig, axes = plt.subplots(
        nrows, ncols, figsize=(3.2 * ncols, 2.8 * nrows), squeeze=False
    )
    for ax in axes.flat[n:]:
        ax.set_visible(False)
    for ax, report in zip(axes.flat, reports):
        entries = list(report.top_activated) + list(reversed(report.top_deactivated))
        tokens = [t for t, _ in entries]
        weights = [w for _, w in entries]
        colors = ["#4878a8" if w >= 0 else "#b84848" for w in weights]
        ypos = range(len(entries) - 1, -1, -1)
        ax.barh(list(ypos), weights, color=colors)
        ax.set_yticks(list(ypos), tokens, fontsize=8)
        ax.axvline(0, color="black", linewidth=0.6)
        ax.set_title(f"filter {report.filter_index}", fontsize=9)
        ax.tick_params(axis="x", labelsize=8)
    fig.suptitle("Strongest word weights per filter")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path
