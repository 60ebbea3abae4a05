"""Matplotlib renderings written next to the delimited outputs.

All figures go through the Agg backend with PNG metadata stripped, so repeated
runs over identical inputs produce byte-identical images.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np
from matplotlib.colors import ListedColormap
from matplotlib.patches import Patch

from .gazemap import TARGET_BACKGROUND, TARGET_NO_FRAME, TARGET_OFF_FRAME

_SAVEFIG = dict(dpi=110, metadata={"Software": None})


def save_correlation_curves(curves: dict[str, np.ndarray], reference: str, path) -> None:
    """Normalized cross-correlation against the reference, one line per stream."""
    fig, ax = plt.subplots(figsize=(8.0, 4.0))
    for stream_id in sorted(curves):
        curve = curves[stream_id]
        ax.plot(curve[:, 0], curve[:, 1], lw=0.8, label=f"{reference} vs {stream_id}")
        peak = curve[np.argmax(curve[:, 1])]
        ax.axvline(peak[0], color="0.7", lw=0.6, zorder=0)
    ax.set_xlabel("lag (s)")
    ax.set_ylabel("normalized correlation")
    ax.legend(loc="upper right", fontsize=8)
    fig.tight_layout()
    fig.savefig(path, **_SAVEFIG)
    plt.close(fig)


def save_quality_timelines(report, path) -> None:
    """Frame-wise IFC/BR/OS stacked on a shared frame axis."""
    fig, axes = plt.subplots(3, 1, figsize=(8.0, 5.0), sharex=True)
    frames = np.arange(report.n_frames)
    series = [
        ("IFC", frames[1:], report.ifc, "tab:blue"),
        ("BR", frames, report.br, "tab:orange"),
        ("OS", frames, report.os, "tab:green"),
    ]
    for ax, (label, x, values, color) in zip(axes, series):
        if len(values):
            ax.plot(x, values, color=color, lw=1.0)
        ax.set_ylabel(label)
        ax.set_ylim(-0.02, 1.02)
    axes[-1].set_xlabel("frame")
    fig.tight_layout()
    fig.savefig(path, **_SAVEFIG)
    plt.close(fig)


def save_gaze_ribbon(trajectory, object_names, path) -> None:
    """Gaze-target ribbon over time plus the per-object confidence heatmap."""
    categories = [TARGET_BACKGROUND, TARGET_OFF_FRAME, TARGET_NO_FRAME, *object_names]
    index = {name: i for i, name in enumerate(categories)}
    times = np.array([s.timestamp_ns for s in trajectory]) / 1e9
    targets = np.array([[index.get(s.target, 0) for s in trajectory]])
    ratios = np.array([[s.ratios.get(name, 0.0) for s in trajectory] for name in object_names])

    palette = ["#d9d9d9", "#969696", "#f7f7f7"] + [f"C{i}" for i in range(len(object_names))]
    extent = (times[0], times[-1], 0, 1) if len(times) > 1 else (0, 1, 0, 1)

    fig, (ax_ribbon, ax_heat) = plt.subplots(
        2, 1, figsize=(8.0, 3.6), sharex=True, gridspec_kw={"height_ratios": [1, 2]}
    )
    ax_ribbon.imshow(
        targets,
        aspect="auto",
        interpolation="nearest",
        cmap=ListedColormap(palette),
        vmin=-0.5,
        vmax=len(categories) - 0.5,
        extent=extent,
    )
    ax_ribbon.set_yticks([])
    ax_ribbon.set_ylabel("target")
    handles = [Patch(color=palette[index[n]], label=n) for n in categories]
    ax_ribbon.legend(handles=handles, loc="upper right", fontsize=6, ncol=len(categories))

    if ratios.size:
        ax_heat.imshow(
            ratios,
            aspect="auto",
            interpolation="nearest",
            cmap="viridis",
            vmin=0.0,
            vmax=1.0,
            extent=(extent[0], extent[1], -0.5, len(object_names) - 0.5),
        )
        ax_heat.set_yticks(range(len(object_names)), labels=list(object_names), fontsize=7)
    ax_heat.set_xlabel("time (s)")
    ax_heat.set_ylabel("confidence")
    fig.tight_layout()
    fig.savefig(path, **_SAVEFIG)
    plt.close(fig)
