"""Figures written next to the delimited reports.

Uses the object-oriented Agg API so nothing touches pyplot's global state,
and strips the PNG ``Software`` tag so identical data gives identical files.
"""

from __future__ import annotations

import math
from pathlib import Path

import numpy as np
from matplotlib.backends.backend_agg import FigureCanvasAgg
from matplotlib.figure import Figure

from .report import ENERGY_KEYS, ComparisonTable, CostReport

STYLE = {
    "font.size": 8,
    "axes.labelsize": 8,
    "axes.titlesize": 9,
    "legend.fontsize": 7,
    "xtick.labelsize": 7,
    "ytick.labelsize": 7,
}
PNG_METADATA = {"Software": None}


def _figure(width=4.8, height=2.8) -> Figure:
    import matplotlib as mpl

    with mpl.rc_context(STYLE):
        fig = Figure(figsize=(width, height), dpi=150)
        FigureCanvasAgg(fig)
    return fig


def _tidy(ax):
    ax.spines["top"].set_visible(False)
    ax.spines["right"].set_visible(False)
    ax.set_axisbelow(True)
    ax.grid(axis="y", alpha=0.25, linewidth=0.6)


def _finite(v):
    return v if v is not None and math.isfinite(v) and v > 0 else np.nan


def _grouped_bars(table: ComparisonTable, attr: str, ylabel: str, path: Path) -> Path:
    import matplotlib as mpl

    groups = table.networks() + ["geomean"]
    designs = table.designs()
    width = 0.8 / max(len(designs), 1)
    x = np.arange(len(groups))
    with mpl.rc_context(STYLE):
        fig = _figure(max(4.0, 0.9 * len(groups) + 2.6))
        ax = fig.add_subplot()
        for k, d in enumerate(designs):
            vals = []
            for g in groups:
                try:
                    vals.append(_finite(getattr(table.row(d, g), attr)))
                except KeyError:
                    vals.append(np.nan)
            ax.bar(x + (k - (len(designs) - 1) / 2) * width, vals, width, label=d)
        ax.set_yscale("log")
        ax.set_xticks(x)
        ax.set_xticklabels(groups)
        ax.set_ylabel(ylabel)
        ax.axhline(1.0, color="0.3", linewidth=0.6)
        _tidy(ax)
        ax.legend(frameon=False, loc="upper left", bbox_to_anchor=(1.0, 1.0))
        fig.tight_layout()
        fig.savefig(path, metadata=PNG_METADATA)
    return path


def plot_comparison(table: ComparisonTable, out_dir) -> list[Path]:
    """Normalized latency and energy bar charts (log scale), one group per network."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return [
        _grouped_bars(table, "latency_improvement",
                      f"latency improvement vs {table.baseline}", out / "latency.png"),
        _grouped_bars(table, "energy_ratio",
                      f"energy normalized to {table.baseline}", out / "energy.png"),
    ]


def plot_energy_breakdown(report: CostReport, path) -> Path:
    """Stacked per-layer energy of the crossbar layers."""
    import matplotlib as mpl

    layers = [l for l in report.layers if not l.host]
    labels = [f"L{l.index}" for l in layers]
    with mpl.rc_context(STYLE):
        fig = _figure(max(3.2, 0.6 * len(layers) + 2.0))
        ax = fig.add_subplot()
        bottom = np.zeros(len(layers))
        for key in ENERGY_KEYS:
            vals = np.array([l.energy.get(key, 0.0) for l in layers])
            if vals.any():
                ax.bar(labels, vals, 0.6, bottom=bottom, label=key)
                bottom += vals
        ax.set_ylabel("energy (J)")
        ax.set_title(f"{report.design} on {report.network}")
        _tidy(ax)
        if bottom.any():
            ax.legend(frameon=False)
        fig.tight_layout()
        fig.savefig(path, metadata=PNG_METADATA)
    return Path(path)
