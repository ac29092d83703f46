"""Matplotlib rendering of 2-D grids (membership shading + zero contours).

matplotlib is an optional dependency and is imported lazily; the Agg
backend is forced so no display is needed.
"""
from __future__ import annotations

import numpy as np

from .svg import PALETTE


def _pyplot():
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    return plt


def plot_grids(grids, path, labels=None, title: str | None = None, dpi: int = 120):
    """Write a PNG with one shaded membership layer and zero contour per grid."""
    plt = _pyplot()
    from matplotlib.colors import ListedColormap
    from matplotlib.lines import Line2D

    grids = list(grids)
    labels = list(labels or [f"layer {i}" for i in range(len(grids))])
    fig, ax = plt.subplots(figsize=(5, 5))
    handles = []
    for idx, (g, label) in enumerate(zip(grids, labels)):
        if g.n != 2:
            plt.close(fig)
            raise ValueError(f"figures need 2-D grids, got n = {g.n}")
        axes, values, member = g.as_arrays()
        color = PALETTE[idx % len(PALETTE)]
        alpha = min(0.25 + 0.2 * idx, 0.85)
        shade = np.ma.masked_where(~member.T, np.ones_like(values.T))
        ax.pcolormesh(axes[0], axes[1], shade, cmap=ListedColormap([color]), alpha=alpha,
                      shading="nearest", vmin=0, vmax=1)
        if values.min() < 0 < values.max():
            ax.contour(axes[0], axes[1], values.T, levels=[0.0], colors=[color], linewidths=1.2)
        handles.append(Line2D([0], [0], color=color, lw=4, alpha=max(alpha, 0.5), label=label))
    ax.set_xlabel("x1")
    ax.set_ylabel("x2")
    ax.set_aspect("equal")
    if title:
        ax.set_title(title)
    ax.legend(handles=handles, loc="upper right", fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=dpi, metadata={"Software": None})
    plt.close(fig)
    return path
