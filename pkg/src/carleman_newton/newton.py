"""Carleman-Newton iteration and source reconstruction."""
from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field

import numpy as np

from .carleman import CarlemanParams, assemble_step, solve_step
from .errors import SolverError
from .grid import Grid2D, inward_offsets
from .nonlinearity import Nonlinearity, get_nonlinearity
from .phantoms import Phantom
from .spectral import SpectralBoundaryData, linearization_blocks, residual
from .time_basis import TimeBasis

logger = logging.getLogger(__name__)


@dataclass
class IterationHistory:
    inc_inf: list = field(default_factory=list)
    inc_l2: list = field(default_factory=list)
    J: list = field(default_factory=list)
    normal_residual: list = field(default_factory=list)
    wall: list = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.inc_inf)

    def append(self, inc: np.ndarray, h: float, info, wall: float) -> None:
        self.inc_inf.append(float(np.abs(inc).max()))
        self.inc_l2.append(float(np.sqrt(h * h * np.sum(inc * inc))))
        self.J.append(info.J)
        self.normal_residual.append(info.normal_residual)
        self.wall.append(wall)


def lift_boundary(data: SpectralBoundaryData, grid: Grid2D) -> np.ndarray:
    """State equal to G0 on the outer layer and G0 - h G1 on the next layer.

    The second layer makes the one-sided difference (V_0 - V_1)/h equal G1.
    Ring corners take their value from the bottom/top sides.
    """
    b = data.bindex
    N, n = data.N, grid.n
    V = np.zeros((N, n, n))
    V[:, b.i, b.j] = data.G0.T
    di, dj = inward_offsets(b)
    ii, jj = b.i + di, b.j + dj
    inner = (ii >= 1) & (ii <= n - 2) & (jj >= 1) & (jj <= n - 2)
    vals = (data.G0 - grid.h * data.G1).T
    for sides in (("left", "right"), ("bottom", "top")):
        sel = inner & np.isin(b.side, sides)
        V[:, ii[sel], jj[sel]] = vals[:, sel]
    return V


def newton_step(U, S, f, basis, grid, params, eps, solver="direct", max_lsq_iters=20000, lsq_tol=1e-12):
    L = residual(U, S, f, basis, grid)
    blocks = linearization_blocks(U, f, basis, grid)
    problem = assemble_step(U, L, blocks, S, params, eps, grid)
    return solve_step(problem, method=solver, max_iters=max_lsq_iters, tol=lsq_tol)


def initial_guess(data: SpectralBoundaryData, S, params: CarlemanParams, eps: float, basis: TimeBasis, grid: Grid2D, **solver_kw):
    """Best fit of Lap U - S U + U = 0 with the given Cauchy data."""
    V = lift_boundary(data, grid)
    inc, info = newton_step(V, S, get_nonlinearity("linear"), basis, grid, params, eps, **solver_kw)
    logger.info("initial guess: J=%.4e, normal residual %.1e", info.J, info.normal_residual)
    return V + inc


def iterate(
    U0: np.ndarray,
    S: np.ndarray,
    f: Nonlinearity,
    basis: TimeBasis,
    grid: Grid2D,
    params: CarlemanParams,
    eps: float,
    kappa0: float = 1e-6,
    max_iters: int = 6,
    progress=None,
    **solver_kw,
):
    """Run U_n = U_{n-1} + h_n until ||h_n||_inf <= kappa0 or max_iters."""
    U = U0.copy()
    hist = IterationHistory()
    for it in range(1, max_iters + 1):
        t0 = time.perf_counter()
        inc, info = newton_step(U, S, f, basis, grid, params, eps, **solver_kw)
        U = U + inc
        hist.append(inc, grid.h, info, time.perf_counter() - t0)
        if progress is not None:
            progress(it, hist)
        logger.info("iteration %d: |h|_inf=%.4e |h|_L2=%.4e J=%.4e", it, hist.inc_inf[-1], hist.inc_l2[-1], info.J)
        if not np.all(np.isfinite(U)):
            raise SolverError(f"non-finite iterate at step {it}")
        if it >= 3 and hist.inc_inf[-1] > 10 * hist.inc_inf[-3] and hist.inc_inf[-2] > hist.inc_inf[-3]:
            raise SolverError(f"iteration diverging: increments {hist.inc_inf[-3:]}")
        if hist.inc_inf[-1] <= kappa0:
            break
    return U, hist


def reconstruct_source(U: np.ndarray, basis: TimeBasis) -> np.ndarray:
    """p(x) = sum_m u_m(x) psi_m(0)."""
    if U.shape[0] != basis.N:
        raise ValueError(f"state has {U.shape[0]} components, basis has {basis.N}")
    return np.tensordot(basis.psi0, U, axes=1)


def metrics(p_comp: np.ndarray, phantom: Phantom, grid: Grid2D) -> dict:
    X, Y = grid.mesh()
    p_true = phantom(X, Y)
    out = {}
    denom = np.sqrt(np.sum(p_true**2))
    out["l2_rel_err"] = float(np.sqrt(np.sum((p_comp - p_true) ** 2)) / denom) if denom > 0 else float("nan")
    out["peak_true"] = float(p_true.max())
    out["peak_comp"] = float(p_comp.max())
    if phantom.inclusions:
        for k, d in enumerate(phantom.inclusions):
            tag = d.label or f"inc{k}"
            m = d.mask(X, Y)
            peak = float(p_comp[m].max())
            out[f"{tag}_peak_comp"] = peak
            out[f"{tag}_peak_rel_err"] = abs(d.value - peak) / d.value
            cx, cy = _centroid(p_comp, X, Y, (X - d.cx) ** 2 + (Y - d.cy) ** 2 <= (2 * d.radius) ** 2)
            out[f"{tag}_centroid_x"] = cx
            out[f"{tag}_centroid_y"] = cy
        main = max(phantom.inclusions, key=lambda d: d.value)
        out["peak_comp"] = max(float(p_comp[d.mask(X, Y)].max()) for d in phantom.inclusions)
        out["peak_true"] = main.value
    else:
        cx, cy = _centroid(p_comp, X, Y, np.ones_like(X, bool))
        out["centroid_x"], out["centroid_y"] = cx, cy
    out["peak_rel_err"] = abs(out["peak_true"] - out["peak_comp"]) / out["peak_true"]
    return out


def _centroid(p, X, Y, region):
    """Centroid of the nodes in ``region`` where p exceeds half its regional max."""
    vals = np.where(region, p, -np.inf)
    top = vals.max()
    sel = region & (p >= 0.5 * top)
    if top <= 0 or not sel.any():
        return float("nan"), float("nan")
    wts = p[sel]
    return float(np.sum(wts * X[sel]) / wts.sum()), float(np.sum(wts * Y[sel]) / wts.sum())


def relative_peak_error(peak_comp: float, peak_true: float) -> float:
    return abs(peak_true - peak_comp) / peak_true
