"""Tensor-grid evaluation and the CSV grid format.

A grid file has header ``x1,...,xn,p_value,member`` and one row per grid
point (first coordinate varying slowest); numbers are printed with 17
significant digits so that re-running a command reproduces the file byte
for byte.
"""
from __future__ import annotations

import io
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .poly import Polynomial
from .problem import BoxDomain


@dataclass
class Grid:
    resolution: int
    points: np.ndarray  # (R**n, n)
    values: np.ndarray  # (R**n,)
    member: np.ndarray  # (R**n,) bool

    @property
    def n(self) -> int:
        return self.points.shape[1]

    @property
    def member_fraction(self) -> float:
        return float(np.mean(self.member))

    def axes(self) -> list:
        return [np.unique(self.points[:, i]) for i in range(self.n)]

    def as_arrays(self):
        """(axes, values, member) with values/member reshaped to (R,)*n."""
        shape = (self.resolution,) * self.n
        return self.axes(), self.values.reshape(shape), self.member.reshape(shape)


def membership(values, predicate: str) -> np.ndarray:
    if predicate == "le0":
        return values <= 0
    if predicate == "ge0":
        return values >= 0
    raise ValueError(f"predicate must be 'le0' or 'ge0', not {predicate!r}")


def evaluate_grid(polys, box: BoxDomain, resolution: int, predicate: str = "le0") -> Grid:
    """Evaluate p on the tensor grid.  Several polynomials are combined by their
    pointwise max: max <= 0 is the intersection of the sublevel sets and
    max >= 0 the union of the superlevel sets."""
    if resolution < 2:
        raise ValueError("grid resolution must be at least 2")
    if isinstance(polys, Polynomial):
        polys = [polys]
    for p in polys:
        if p.n_vars != box.dim:
            raise ValueError(f"polynomial has {p.n_vars} variables but the box has dimension {box.dim}")
    pts = box.grid(resolution)
    vals = np.max(np.stack([p.evaluate_many(pts) for p in polys]), axis=0)
    return Grid(resolution, pts, vals, membership(vals, predicate))


def grid_from_values(box: BoxDomain, resolution: int, values, predicate: str) -> Grid:
    """Grid for precomputed values (e.g. an oracle value function); -inf
    entries are replaced by (finite minimum - 1) to keep the file finite."""
    values = np.asarray(values, dtype=float).copy()
    member = membership(values, predicate)
    bad = ~np.isfinite(values)
    if bad.any():
        finite = values[~bad]
        floor = (finite.min() if finite.size else 0.0) - 1.0
        values[bad] = floor
    return Grid(resolution, box.grid(resolution), values, member)


def _fmt(v: float) -> str:
    return format(float(v), ".17g")


def grid_to_csv(grid: Grid) -> str:
    buf = io.StringIO()
    cols = [f"x{i + 1}" for i in range(grid.n)] + ["p_value", "member"]
    buf.write(",".join(cols) + "\n")
    for pt, v, m in zip(grid.points, grid.values, grid.member):
        buf.write(",".join([*(_fmt(c) for c in pt), _fmt(v), "1" if m else "0"]) + "\n")
    return buf.getvalue()


def write_grid(grid: Grid, path):
    Path(path).write_text(grid_to_csv(grid))


def read_grid(path) -> Grid:
    lines = Path(path).read_text().splitlines()
    if not lines:
        raise ValueError(f"{path}: empty grid file")
    header = lines[0].split(",")
    n = len(header) - 2
    if n < 1 or header[-2:] != ["p_value", "member"] or header[:n] != [f"x{i + 1}" for i in range(n)]:
        raise ValueError(f"{path}: header must be x1,...,xn,p_value,member")
    data = np.array([[float(c) for c in ln.split(",")] for ln in lines[1:] if ln], dtype=float)
    res = round(len(data) ** (1.0 / n))
    if res < 2 or res**n != len(data):
        raise ValueError(f"{path}: {len(data)} rows is not resolution**{n}")
    return Grid(res, data[:, :n], data[:, n], data[:, n + 1] > 0.5)
