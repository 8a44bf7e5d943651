"""Figure rendering for run and comparison reports.

Renders PNGs next to the plain-text series files; the figures carry the same
data the .dat files do, one panel per metric.
"""

from __future__ import annotations

from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402


def render_series(
    path: str | Path,
    series: Sequence[tuple[str, Sequence[float], Sequence[float]]],
    *,
    xlabel: str,
    ylabel: str,
    logy: bool = False,
) -> None:
    """One panel of labeled lines; series = (label, x, y)."""
    fig, ax = plt.subplots(figsize=(5.0, 3.4))
    for label, x, y in series:
        ax.plot(x, y, label=label, linewidth=1.2)
    _finish(fig, ax, path, xlabel, ylabel, logy, show_legend=len(series) > 1)


def render_band_series(
    path: str | Path,
    series: Sequence[tuple[str, Sequence[float], Sequence[float], Sequence[float], Sequence[float]]],
    *,
    xlabel: str,
    ylabel: str,
    logy: bool = False,
) -> None:
    """Mean lines with min/max bands; series = (label, x, mean, lo, hi)."""
    fig, ax = plt.subplots(figsize=(5.0, 3.4))
    for label, x, mean, lo, hi in series:
        (line,) = ax.plot(x, mean, label=label, linewidth=1.2)
        ax.fill_between(x, lo, hi, color=line.get_color(), alpha=0.2, linewidth=0)
    _finish(fig, ax, path, xlabel, ylabel, logy, show_legend=True)


def _finish(fig, ax, path, xlabel, ylabel, logy, show_legend):
    if logy:
        ax.set_yscale("log")
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    ax.grid(True, alpha=0.3)
    if show_legend:
        ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)
