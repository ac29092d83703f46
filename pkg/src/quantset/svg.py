"""Zero contours and membership regions of 2-D grids as plain SVG.

The contour is extracted with marching squares (saddle cells resolved by the
cell-centre average), segments are chained into polylines through their
shared grid edges, and all coordinates are printed with a fixed format, so
identical grids give identical files.
"""
from __future__ import annotations

from pathlib import Path

import numpy as np

from .grids import Grid

PALETTE = ("#4d4d4d", "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e")
SIZE = 480.0
MARGIN = 24.0


def _edge_point(V, axes, key):
    kind, i, j = key
    if kind == "a":  # between (i, j) and (i + 1, j)
        v0, v1 = V[i, j], V[i + 1, j]
        t = v0 / (v0 - v1)
        return axes[0][i] + t * (axes[0][i + 1] - axes[0][i]), axes[1][j]
    v0, v1 = V[i, j], V[i, j + 1]
    t = v0 / (v0 - v1)
    return axes[0][i], axes[1][j] + t * (axes[1][j + 1] - axes[1][j])


def marching_squares(axes, V, level: float = 0.0) -> list:
    """Polylines (lists of (x1, x2)) of the ``level`` set of V sampled on axes[0] x axes[1]."""
    V = np.asarray(V, dtype=float) - level
    inside = V > 0
    nx, ny = V.shape
    links: dict = {}

    def link(e1, e2):
        links.setdefault(e1, []).append(e2)
        links.setdefault(e2, []).append(e1)

    for i in range(nx - 1):
        for j in range(ny - 1):
            a, b, c, d = inside[i, j], inside[i + 1, j], inside[i + 1, j + 1], inside[i, j + 1]
            bottom, right, top, left = ("a", i, j), ("b", i + 1, j), ("a", i, j + 1), ("b", i, j)
            cut = [e for e, s, t in ((bottom, a, b), (right, b, c), (top, c, d), (left, d, a)) if s != t]
            if len(cut) == 2:
                link(*cut)
            elif len(cut) == 4:
                centre = (V[i, j] + V[i + 1, j] + V[i + 1, j + 1] + V[i, j + 1]) / 4 > 0
                if centre == a:
                    link(bottom, right)
                    link(top, left)
                else:
                    link(left, bottom)
                    link(right, top)

    seen = set()
    lines = []

    def walk(start):
        chain = [start]
        seen.add(start)
        cur = start
        while True:
            nxt = [e for e in links[cur] if e not in seen]
            if not nxt:
                break
            cur = min(nxt)
            seen.add(cur)
            chain.append(cur)
        if len(chain) > 2 and start in links[cur]:
            chain.append(start)  # closed loop
        return chain

    for key in sorted(k for k, v in links.items() if len(v) == 1):
        if key not in seen:
            lines.append(walk(key))
    for key in sorted(links):
        if key not in seen:
            lines.append(walk(key))
    return [[_edge_point(V, axes, e) for e in chain] for chain in lines]


def _runs(row):
    """(start, stop) index pairs of consecutive True entries."""
    out = []
    start = None
    for idx, flag in enumerate(row):
        if flag and start is None:
            start = idx
        elif not flag and start is not None:
            out.append((start, idx - 1))
            start = None
    if start is not None:
        out.append((start, len(row) - 1))
    return out


def _cell_bounds(ax):
    mids = (ax[1:] + ax[:-1]) / 2
    return np.concatenate([[ax[0]], mids]), np.concatenate([mids, [ax[-1]]])


class _Frame:
    def __init__(self, lo, hi):
        self.lo, self.hi = np.asarray(lo, float), np.asarray(hi, float)
        span = self.hi - self.lo
        self.scale = SIZE / max(span)
        self.width = span[0] * self.scale + 2 * MARGIN
        self.height = span[1] * self.scale + 2 * MARGIN

    def __call__(self, x1, x2):
        u = MARGIN + (x1 - self.lo[0]) * self.scale
        v = self.height - MARGIN - (x2 - self.lo[1]) * self.scale
        return f"{u:.3f},{v:.3f}"


def _fill_path(grid: Grid, frame: _Frame) -> str:
    axes, _, member = grid.as_arrays()
    lo0, hi0 = _cell_bounds(axes[0])
    lo1, hi1 = _cell_bounds(axes[1])
    parts = []
    for j in range(len(axes[1])):
        for a, b in _runs(member[:, j]):
            parts.append(f"M{frame(lo0[a], lo1[j])} L{frame(hi0[b], lo1[j])} "
                         f"L{frame(hi0[b], hi1[j])} L{frame(lo0[a], hi1[j])} Z")
    return " ".join(parts)


def render_svg(grids, labels=None) -> str:
    """SVG text showing, for every grid, its membership region and the zero
    contour of its values; later grids are drawn on top with higher opacity."""
    grids = list(grids)
    if not grids:
        raise ValueError("need at least one grid")
    for g in grids:
        if g.n != 2:
            raise ValueError(f"SVG output needs 2-D grids, got a grid with n = {g.n}")
    labels = list(labels or [f"layer {i}" for i in range(len(grids))])
    lo = np.min([g.points.min(axis=0) for g in grids], axis=0)
    hi = np.max([g.points.max(axis=0) for g in grids], axis=0)
    frame = _Frame(lo, hi)
    out = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{frame.width:.3f}" height="{frame.height:.3f}" '
        f'viewBox="0 0 {frame.width:.3f} {frame.height:.3f}">',
        f'<rect x="{MARGIN:.3f}" y="{MARGIN:.3f}" width="{frame.width - 2 * MARGIN:.3f}" '
        f'height="{frame.height - 2 * MARGIN:.3f}" fill="white" stroke="black" stroke-width="1"/>',
    ]
    for idx, (g, label) in enumerate(zip(grids, labels)):
        color = PALETTE[idx % len(PALETTE)]
        opacity = min(0.25 + 0.2 * idx, 0.85)
        out.append(f'<g id="layer{idx}">')
        out.append(f"<title>{_escape(label)}</title>")
        fill = _fill_path(g, frame)
        if fill:
            out.append(f'<path class="member" d="{fill}" fill="{color}" fill-opacity="{opacity:.2f}" stroke="none"/>')
        axes, values, _ = g.as_arrays()
        for line in marching_squares(axes, values):
            pts = " ".join(frame(x1, x2) for x1, x2 in line)
            out.append(f'<polyline class="contour" points="{pts}" fill="none" stroke="{color}" stroke-width="1.5"/>')
        out.append("</g>")
    for idx, label in enumerate(labels):
        y = MARGIN + 14 * (idx + 1)
        out.append(f'<text x="{MARGIN + 6:.3f}" y="{y:.3f}" font-size="11" font-family="sans-serif" '
                   f'fill="{PALETTE[idx % len(PALETTE)]}">{_escape(label)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def _escape(text: str) -> str:
    return str(text).replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")


def write_svg(grids, path, labels=None):
    Path(path).write_text(render_svg(grids, labels))
