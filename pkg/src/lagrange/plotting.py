"""Figure rendering for run reports.

Figures go straight to SVG files next to the CSV output: a stacked overview
(impulse response, full weight traces, last 20% and last 10% windows) for
runs, and a single panel for impulse-response dumps.  Panels are 9x3 inches
at 100 dpi, i.e. 900x300 each.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

__all__ = ["render_impulse_figure", "render_run_figure"]

PANEL_W, PANEL_H, DPI = 9.0, 3.0, 100

# First two weights keep the traditional colors (weight blue, bias green).
_TRACE_COLORS = ("tab:blue", "tab:green")


def render_impulse_figure(times, values, path) -> None:
    """Single-panel plot of the impulse response."""
    fig, ax = plt.subplots(figsize=(PANEL_W, PANEL_H), dpi=DPI)
    ax.plot(times, values, color="tab:red", lw=1.0)
    ax.set_xlabel("t")
    ax.set_ylabel("g(t)")
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, format="svg")
    plt.close(fig)


def _plot_traces(ax, trace, row_slice) -> None:
    times = trace.times[row_slice]
    for c, wid in enumerate(trace.weight_ids):
        color = _TRACE_COLORS[c] if c < len(_TRACE_COLORS) else None
        label = wid if len(trace.weight_ids) <= 6 else None
        ax.plot(times, trace.values[row_slice, c], color=color, lw=0.8, label=label)
    if len(trace.weight_ids) <= 6:
        ax.legend(loc="upper right", fontsize=8)
    ax.grid(True, alpha=0.3)


def render_run_figure(trace, g_times, g_values, path) -> None:
    """Stacked run overview: g(t), full traces, last 20%, last 10%."""
    fig, axes = plt.subplots(4, 1, figsize=(PANEL_W, 4 * PANEL_H), dpi=DPI)
    axes[0].plot(g_times, g_values, color="tab:red", lw=1.0)
    axes[0].set_ylabel("g(t)")
    axes[0].grid(True, alpha=0.3)
    rows = trace.times.shape[0]
    windows = (slice(None), slice(max(0, rows - rows // 5), None), slice(max(0, rows - rows // 10), None))
    labels = ("weights", "last 20%", "last 10%")
    for ax, window, label in zip(axes[1:], windows, labels):
        _plot_traces(ax, trace, window)
        ax.set_ylabel(label)
    axes[-1].set_xlabel("t")
    fig.tight_layout()
    fig.savefig(path, format="svg")
    plt.close(fig)
