"""Uniform square grids and finite-difference operators.

Fields are arrays indexed ``f[i, j] = f(x_i, y_j)``; axis 0 runs along x,
axis 1 along y.  Vector fields carry a leading axis of length 2.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

SIDES = ("bottom", "top", "left", "right")
_NORMALS = {"bottom": (0.0, -1.0), "top": (0.0, 1.0), "left": (-1.0, 0.0), "right": (1.0, 0.0)}


@dataclass(frozen=True)
class Grid2D:
    """n x n nodes ``x_i = start + (first + i) h`` on both axes.

    ``half_width`` is the nominal half side length of the square the grid
    discretises; the extreme nodes sit at +-half_width only for grids built
    with :meth:`square`.  Sub-grids keep the parent's ``start`` and record
    their index offset in ``first`` so shared nodes have identical coordinates.
    """

    half_width: float
    n: int
    h: float
    start: float
    first: int = 0
    parent_n: int | None = None

    def __post_init__(self):
        if self.n < 3:
            raise ValueError(f"grid needs at least 3 points per axis, got {self.n}")
        if self.h <= 0:
            raise ValueError("grid spacing must be positive")

    @classmethod
    def square(cls, half_width: float, n: int) -> "Grid2D":
        return cls(half_width=float(half_width), n=int(n), h=2.0 * half_width / (n - 1), start=-float(half_width))

    @property
    def coords(self) -> np.ndarray:
        total = self.parent_n if self.parent_n is not None else self.n
        c = self.start + self.h * np.arange(total)
        if self.parent_n is not None or self.start == -self.half_width:
            c[-1] = -self.start  # symmetric root grid: last node exactly at +half_width
        return c[self.first : self.first + self.n]

    def mesh(self) -> tuple[np.ndarray, np.ndarray]:
        c = self.coords
        return np.meshgrid(c, c, indexing="ij")

    @property
    def shape(self) -> tuple[int, int]:
        return (self.n, self.n)


@dataclass(frozen=True)
class BoundaryIndex:
    """Boundary nodes in a fixed order: bottom, top (both left to right,
    owning the corners), then left and right (bottom to top, corners
    excluded)."""

    i: np.ndarray
    j: np.ndarray
    side: np.ndarray
    normal: np.ndarray

    def __len__(self) -> int:
        return self.i.size

    def side_mask(self, side: str) -> np.ndarray:
        return self.side == side


def boundary_index(grid: Grid2D) -> BoundaryIndex:
    n = grid.n
    full = np.arange(n)
    inner = np.arange(1, n - 1)
    parts = [
        (full, np.zeros(n, int), "bottom"),
        (full, np.full(n, n - 1), "top"),
        (np.zeros(n - 2, int), inner, "left"),
        (np.full(n - 2, n - 1), inner, "right"),
    ]
    i = np.concatenate([p[0] for p in parts])
    j = np.concatenate([p[1] for p in parts])
    side = np.concatenate([np.full(p[0].size, p[2]) for p in parts])
    normal = np.array([_NORMALS[s] for s in side])
    return BoundaryIndex(i=i, j=j, side=side, normal=normal)


def inward_offsets(b: BoundaryIndex) -> tuple[np.ndarray, np.ndarray]:
    """Index step (di, dj) pointing from each boundary node into the grid."""
    return -b.normal[:, 0].astype(int), -b.normal[:, 1].astype(int)


def laplacian(f: np.ndarray, h: float) -> np.ndarray:
    """Five-point Laplacian on the last two axes; boundary entries are 0."""
    out = np.zeros_like(f, dtype=float)
    out[..., 1:-1, 1:-1] = (
        f[..., 2:, 1:-1] + f[..., :-2, 1:-1] + f[..., 1:-1, 2:] + f[..., 1:-1, :-2] - 4.0 * f[..., 1:-1, 1:-1]
    ) / h**2
    return out


def _diff_axis(f: np.ndarray, h: float, axis: int) -> np.ndarray:
    f = np.moveaxis(np.asarray(f, dtype=float), axis, -1)
    d = np.empty_like(f)
    d[..., 1:-1] = (f[..., 2:] - f[..., :-2]) / (2 * h)
    d[..., 0] = (-3 * f[..., 0] + 4 * f[..., 1] - f[..., 2]) / (2 * h)
    d[..., -1] = (3 * f[..., -1] - 4 * f[..., -2] + f[..., -3]) / (2 * h)
    return np.moveaxis(d, -1, axis)


def gradient(f: np.ndarray, h: float) -> np.ndarray:
    """Central differences inside, second-order one-sided on the boundary.

    Returns an array with a new leading axis of length 2 (d/dx, d/dy).
    """
    f = np.asarray(f, dtype=float)
    return np.stack([_diff_axis(f, h, f.ndim - 2), _diff_axis(f, h, f.ndim - 1)])


def normal_derivative(f: np.ndarray, b: BoundaryIndex, h: float) -> np.ndarray:
    """Outward normal derivative (3 f0 - 4 f1 + f2) / (2h) at boundary nodes.

    Works on the last two axes; any leading axes are carried through.
    """
    di, dj = inward_offsets(b)
    f0 = f[..., b.i, b.j]
    f1 = f[..., b.i + di, b.j + dj]
    f2 = f[..., b.i + 2 * di, b.j + 2 * dj]
    return (3 * f0 - 4 * f1 + f2) / (2 * h)


def restrict_grid(outer: Grid2D, half_width: float) -> tuple[Grid2D, slice]:
    """Sub-grid of ``outer`` formed by nodes with both coordinates in [-R, R]."""
    c = outer.coords
    # Small slack so nodes that land on +-R up to rounding are kept.
    inside = np.flatnonzero(np.abs(c) <= half_width * (1 + 1e-12))
    if inside.size == 0:
        raise ValueError(f"no nodes of the outer grid fall in [-{half_width}, {half_width}]")
    lo, hi = int(inside[0]), int(inside[-1])
    if hi - lo + 1 < 3:
        raise ValueError("restricted grid has fewer than 3 nodes per axis")
    first = outer.first + lo
    sub = Grid2D(float(half_width), hi - lo + 1, outer.h, outer.start, first, outer.parent_n or outer.n)
    return sub, slice(lo, hi + 1)


def restrict(f: np.ndarray, sl: slice) -> np.ndarray:
    return f[..., sl, sl].copy()
