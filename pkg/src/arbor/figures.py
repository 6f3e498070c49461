"""Report figures rendered straight to PNG files.

Figures are drawn on standalone Figure objects (no pyplot state, no GUI
backend), so rendering is safe in headless runs and repeated calls do
not accumulate. The Software metadata chunk is stripped to keep files
free of toolchain strings.
"""

from __future__ import annotations

from typing import Mapping, Sequence

import numpy as np
from matplotlib.figure import Figure

__all__ = [
    "save_level_values",
    "save_sequences",
    "save_walk_summary",
]

_SAVE_OPTS = dict(dpi=120, metadata={"Software": None})


def _new_axes():
    fig = Figure(figsize=(6.4, 4.2))
    return fig, fig.add_subplot()


def save_level_values(path: str, levels: Sequence[float],
                      values: Sequence[float], ylabel: str,
                      title: str) -> None:
    """Scatter of a per-edge or per-vertex quantity against its level."""
    fig, ax = _new_axes()
    ax.scatter(np.asarray(levels), np.asarray(values), s=12, alpha=0.7)
    ax.set_xlabel("level")
    ax.set_ylabel(ylabel)
    ax.set_title(title)
    ax.grid(True, alpha=0.3)
    fig.savefig(path, **_SAVE_OPTS)


def save_sequences(path: str, x: Sequence[float],
                   series: Mapping[str, Sequence[float]], xlabel: str,
                   title: str, logy: bool = False) -> None:
    """Line plot of one or more sequences over a shared index."""
    fig, ax = _new_axes()
    for label, ys in series.items():
        ax.plot(np.asarray(x), np.asarray(ys), marker="o", markersize=3,
                label=label)
    if logy:
        ax.set_yscale("log")
    ax.set_xlabel(xlabel)
    ax.set_title(title)
    ax.grid(True, alpha=0.3)
    ax.legend()
    fig.savefig(path, **_SAVE_OPTS)


def save_walk_summary(path: str, capacity: float, exact: float,
                      estimate: float, std_error: float,
                      n_walks: int) -> None:
    """Bar chart comparing the exact escape probability with the estimate."""
    fig, ax = _new_axes()
    ax.bar([0, 1, 2], [capacity, exact, estimate],
           color=["#777777", "#4477aa", "#cc6677"])
    ax.errorbar([2], [estimate], yerr=[3.0 * std_error], fmt="none",
                ecolor="black", capsize=6)
    ax.set_xticks([0, 1, 2])
    ax.set_xticklabels(["capacity", "exact escape", f"estimate (n={n_walks})"])
    ax.set_title("escape probability, exact vs simulated (3 sigma bar)")
    ax.grid(True, axis="y", alpha=0.3)
    fig.savefig(path, **_SAVE_OPTS)
