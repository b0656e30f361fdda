"""Explicit finite-difference solver for u_t = Laplace(u) + F(x, u, grad u).

The solve runs on the large square Omega_1 with homogeneous Dirichlet
conditions; the solution is recorded on the inversion window only, which is
all the inverse problem ever sees.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .errors import BlowUpError, CFLError
from .grid import BoundaryIndex, Grid2D, boundary_index, normal_derivative, restrict_grid
from .nonlinearity import Nonlinearity
from .phantoms import Phantom

logger = logging.getLogger(__name__)


@dataclass
class ForwardResult:
    grid: Grid2D
    window_grid: Grid2D
    window: slice
    times: np.ndarray
    history: np.ndarray  # (nt + 1, nw, nw) solution on the inversion window
    outer_max: float  # max |u| next to the outer boundary over all steps
    snapshots: dict = field(default_factory=dict)


def required_nt(grid: Grid2D, T: float) -> int:
    return math.ceil(4.0 * T / grid.h**2)


def run_forward(
    phantom: Phantom,
    f: Nonlinearity,
    grid: Grid2D,
    T: float,
    nt: int,
    R: float = 1.0,
    snapshot_steps=(),
    check_every: int = 25,
) -> ForwardResult:
    """March u^{k+1} = u^k + dt (Lap_h u^k + F(x, u^k, grad_h u^k))."""
    dt = T / nt
    h = grid.h
    if dt > h * h / 4:
        raise CFLError(f"dt={dt:.3e} violates dt <= h^2/4 = {h * h / 4:.3e}; need nt >= {required_nt(grid, T)}")
    win_grid, sl = restrict_grid(grid, R)
    X, Y = grid.mesh()
    Xi, Yi = X[1:-1, 1:-1], Y[1:-1, 1:-1]
    u = phantom(X, Y).astype(float)
    u[[0, -1], :] = 0.0
    u[:, [0, -1]] = 0.0

    history = np.empty((nt + 1, win_grid.n, win_grid.n))
    history[0] = u[sl, sl]
    snaps = {0: u.copy()} if 0 in snapshot_steps else {}
    outer_max = _ring_max(u)
    zero = np.zeros_like(Xi)
    # Overflow is caught by the periodic finiteness check below.
    with np.errstate(over="ignore", invalid="ignore"):
        for k in range(nt):
            c = u[1:-1, 1:-1]
            lap = (u[2:, 1:-1] + u[:-2, 1:-1] + u[1:-1, 2:] + u[1:-1, :-2] - 4.0 * c) / (h * h)
            if f.needs_gradient:
                gx = (u[2:, 1:-1] - u[:-2, 1:-1]) / (2 * h)
                gy = (u[1:-1, 2:] - u[1:-1, :-2]) / (2 * h)
            else:
                gx = gy = zero
            u[1:-1, 1:-1] = c + dt * (lap + f.F(Xi, Yi, c, gx, gy))
            history[k + 1] = u[sl, sl]
            outer_max = max(outer_max, _ring_max(u))
            if (k + 1) % check_every == 0 or k + 1 == nt:
                if not np.all(np.isfinite(u)):
                    raise BlowUpError(f"non-finite solution at step {k + 1} (t={(k + 1) * dt:.4f})")
            if k + 1 in snapshot_steps:
                snaps[k + 1] = u.copy()
    times = np.linspace(0.0, T, nt + 1)
    return ForwardResult(grid, win_grid, sl, times, history, outer_max, snaps)


def _ring_max(u: np.ndarray) -> float:
    return float(max(np.abs(u[1, :]).max(), np.abs(u[-2, :]).max(), np.abs(u[:, 1]).max(), np.abs(u[:, -2]).max()))


@dataclass
class BoundaryTraces:
    """Lateral Cauchy data on the inversion-grid boundary.

    ``g0`` and ``g1`` have shape (n_boundary, n_times).  ``first_index`` is
    the global time-step index of column 0, so windows keep their noise.
    """

    grid: Grid2D
    bindex: BoundaryIndex
    times: np.ndarray
    g0: np.ndarray
    g1: np.ndarray
    delta: float = 0.0
    seed: Optional[int] = None
    first_index: int = 0
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        for g in (self.g0, self.g1):
            if g.shape != (len(self.bindex), self.times.size):
                raise ValueError(f"trace array shape {g.shape} does not match ({len(self.bindex)}, {self.times.size})")

    @property
    def noiseless(self) -> bool:
        return self.delta == 0

    def time_window(self, k0: int, k1: int) -> "BoundaryTraces":
        return replace(
            self,
            times=self.times[k0:k1],
            g0=self.g0[:, k0:k1].copy(),
            g1=self.g1[:, k0:k1].copy(),
            first_index=self.first_index + k0,
        )


def extract_traces(result: ForwardResult, meta: Optional[dict] = None) -> BoundaryTraces:
    g = result.window_grid
    b = boundary_index(g)
    hist = result.history
    g0 = hist[:, b.i, b.j].T.copy()
    g1 = normal_derivative(hist, b, g.h).T.copy()
    if not (np.all(np.isfinite(g0)) and np.all(np.isfinite(g1))):
        raise BlowUpError("non-finite boundary traces")
    return BoundaryTraces(g, b, result.times.copy(), g0, g1, meta=dict(meta or {}))


def noise_multipliers(seed: int, channel: int, node: int, start: int, count: int) -> np.ndarray:
    """Uniform draws on [-1, 1] for one (channel, node) sample stream."""
    rng = np.random.default_rng([seed, channel, node])
    return rng.uniform(-1.0, 1.0, start + count)[start:]


def apply_noise(traces: BoundaryTraces, delta: float, seed: int) -> BoundaryTraces:
    """Multiply every sample by 1 + delta * xi with xi ~ U[-1, 1] i.i.d."""
    if delta < 0:
        raise ValueError("noise level must be non-negative")
    if delta == 0:
        return replace(traces, g0=traces.g0.copy(), g1=traces.g1.copy(), delta=0.0, seed=seed)
    out = []
    for ch, g in enumerate((traces.g0, traces.g1)):
        xi = np.stack([noise_multipliers(seed, ch, k, traces.first_index, g.shape[1]) for k in range(g.shape[0])])
        out.append(g * (1.0 + delta * xi))
    return replace(traces, g0=out[0], g1=out[1], delta=float(delta), seed=int(seed))
