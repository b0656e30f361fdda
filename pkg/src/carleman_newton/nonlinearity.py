"""Nonlinear source terms F(x, u, grad u) with analytic partial derivatives.

Every callable takes ``(x, y, u, gx, gy)`` as broadcastable arrays.
"""
from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Callable, Optional

import numpy as np


def _bump(z):
    z = np.asarray(z, dtype=float)
    out = np.zeros_like(z)
    pos = z > 0
    out[pos] = np.exp(-1.0 / z[pos])
    return out


def _dbump(z):
    z = np.asarray(z, dtype=float)
    out = np.zeros_like(z)
    pos = z > 0
    out[pos] = np.exp(-1.0 / z[pos]) / z[pos] ** 2
    return out


def cutoff(s, B: float):
    """Smooth chi_B(s): 1 for s <= B, 0 for s >= 2B, C-infinity in between."""
    z = (np.asarray(s, dtype=float) - B) / B
    a, b = _bump(z), _bump(1.0 - z)
    return 1.0 - a / (a + b)


def cutoff_derivative(s, B: float):
    z = (np.asarray(s, dtype=float) - B) / B
    a, b = _bump(z), _bump(1.0 - z)
    da, db = _dbump(z), -_dbump(1.0 - z)
    return -(da * b - a * db) / (a + b) ** 2 / B


@dataclass(frozen=True)
class Nonlinearity:
    name: str
    value: Callable
    du: Callable
    dgrad: Callable
    uses_gradient: bool = True
    cutoff_B: Optional[float] = None

    @property
    def needs_gradient(self) -> bool:
        return self.uses_gradient or self.cutoff_B is not None

    def with_cutoff(self, B: Optional[float]) -> "Nonlinearity":
        if B is not None and B <= 0:
            raise ValueError("cutoff bound must be positive")
        return replace(self, cutoff_B=B)

    def F(self, x, y, u, gx, gy):
        f = self.value(x, y, u, gx, gy)
        if self.cutoff_B is None:
            return f
        return cutoff(np.abs(u) + np.hypot(gx, gy), self.cutoff_B) * f

    def dF_du(self, x, y, u, gx, gy):
        d = self.du(x, y, u, gx, gy)
        if self.cutoff_B is None:
            return d
        s = np.abs(u) + np.hypot(gx, gy)
        chi = cutoff(s, self.cutoff_B)
        dchi = cutoff_derivative(s, self.cutoff_B)
        return chi * d + dchi * np.sign(u) * self.value(x, y, u, gx, gy)

    def dF_dgrad(self, x, y, u, gx, gy):
        dx, dy = self.dgrad(x, y, u, gx, gy)
        if self.cutoff_B is None:
            return dx, dy
        g = np.hypot(gx, gy)
        s = np.abs(u) + g
        chi = cutoff(s, self.cutoff_B)
        dchi = cutoff_derivative(s, self.cutoff_B) * self.value(x, y, u, gx, gy)
        safe = np.where(g > 0, g, 1.0)
        return chi * dx + dchi * gx / safe, chi * dy + dchi * gy / safe


def _zeros(x, y, u, gx, gy):
    return np.zeros(np.broadcast(u, gx, gy).shape)


def _ones(x, y, u, gx, gy):
    return np.ones(np.broadcast(u, gx, gy).shape)


def _identity(x, y, u, gx, gy):
    return u + 0.0 * gx


def _no_grad(x, y, u, gx, gy):
    z = _zeros(x, y, u, gx, gy)
    return z, z


def _sqrt_grad_value(x, y, u, gx, gy):
    return u + np.sqrt(gx * gx + gy * gy + 1.0)


def _sqrt_grad_dgrad(x, y, u, gx, gy):
    r = np.sqrt(gx * gx + gy * gy + 1.0)
    return gx / r + 0.0 * u, gy / r + 0.0 * u


NONLINEARITIES = {
    "zero": Nonlinearity("zero", _zeros, _zeros, _no_grad, uses_gradient=False),
    "linear": Nonlinearity("linear", _identity, _ones, _no_grad, uses_gradient=False),
    # Fisher-KPP reaction u (1 - u).
    "fisher": Nonlinearity(
        "fisher",
        lambda x, y, u, gx, gy: u * (1.0 - u) + 0.0 * gx,
        lambda x, y, u, gx, gy: 1.0 - 2.0 * u + 0.0 * gx,
        _no_grad,
        uses_gradient=False,
    ),
    # u + sqrt(|grad u|^2 + 1), a viscous Hamilton-Jacobi type term.
    "sqrt_gradient": Nonlinearity("sqrt_gradient", _sqrt_grad_value, _ones, _sqrt_grad_dgrad),
}


def get_nonlinearity(name: str, cutoff_B: Optional[float] = None) -> Nonlinearity:
    try:
        f = NONLINEARITIES[name]
    except KeyError:
        raise ValueError(f"unknown nonlinearity {name!r}; choose from {sorted(NONLINEARITIES)}") from None
    return f.with_cutoff(cutoff_B)
