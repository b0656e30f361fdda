"""Synthetic true sources p(x, y)."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np


@dataclass(frozen=True)
class Disk:
    cx: float
    cy: float
    radius: float
    value: float
    label: str = ""

    def mask(self, x, y):
        return (x - self.cx) ** 2 + (y - self.cy) ** 2 <= self.radius**2


@dataclass(frozen=True)
class Phantom:
    name: str
    inclusions: tuple[Disk, ...] = ()
    smooth: Callable | None = None

    def __call__(self, x, y) -> np.ndarray:
        x, y = np.broadcast_arrays(np.asarray(x, float), np.asarray(y, float))
        if self.smooth is not None:
            return self.smooth(x, y)
        p = np.zeros(x.shape)
        for d in self.inclusions:
            p[d.mask(x, y)] = d.value
        return p


GAUSSIAN_WIDTH = 0.05


def gaussian(x, y, s: float = GAUSSIAN_WIDTH):
    return np.exp(-(x**2 + y**2) / (4 * s))


def heat_kernel_solution(x, y, t, s: float = GAUSSIAN_WIDTH):
    """Free-space solution of u_t = Laplace(u) with u(., 0) = gaussian."""
    return s / (s + t) * np.exp(-(x**2 + y**2) / (4 * (s + t)))


PHANTOMS = {
    "disk8": Phantom("disk8", (Disk(0.0, 0.3, 0.45, 8.0, "disk"),)),
    "fourdisks": Phantom(
        "fourdisks",
        (
            Disk(0.5, 0.5, 0.35, 12.0, "up_right"),
            Disk(-0.5, -0.5, 0.35, 10.0, "down_left"),
            Disk(0.5, -0.5, 0.35, 14.0, "down_right"),
            Disk(-0.5, 0.5, 0.35, 9.0, "up_left"),
        ),
    ),
    "gaussian": Phantom("gaussian", smooth=gaussian),
}


def get_phantom(name: str) -> Phantom:
    try:
        return PHANTOMS[name]
    except KeyError:
        raise ValueError(f"unknown phantom {name!r}; choose from {sorted(PHANTOMS)}") from None
