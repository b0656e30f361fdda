"""The truncated elliptic system Lap U - S U + F(x, U, grad U) = 0.

A spectral state ``U`` is an array of shape (N, n, n): the time-basis
coefficients u_1..u_N at every node of the inversion grid.  Time synthesis
and projection are done a chunk of nodes at a time so that u(x, t) is never
held for the whole grid at once.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NumericalError
from .forward import BoundaryTraces
from .grid import BoundaryIndex, Grid2D, gradient, laplacian
from .nonlinearity import Nonlinearity
from .time_basis import TimeBasis, project

CHUNK = 512


@dataclass
class SpectralBoundaryData:
    bindex: BoundaryIndex
    G0: np.ndarray  # (n_boundary, N)
    G1: np.ndarray

    @property
    def N(self) -> int:
        return self.G0.shape[1]


def boundary_coeffs(traces: BoundaryTraces, basis: TimeBasis) -> SpectralBoundaryData:
    if traces.times.size != basis.nt + 1 or not np.allclose(traces.times, basis.nodes, rtol=0, atol=1e-12 * basis.T):
        raise ValueError("trace time nodes do not match the basis quadrature nodes")
    nb = len(traces.bindex)
    if traces.g0.shape[0] != nb or traces.g1.shape[0] != nb:
        raise ValueError(f"trace arrays have {traces.g0.shape[0]} nodes, boundary index has {nb}")
    return SpectralBoundaryData(traces.bindex, project(traces.g0, basis), project(traces.g1, basis))


def _node_chunks(P: int, chunk: int = CHUNK):
    for start in range(0, P, chunk):
        yield slice(start, min(start + chunk, P))


def _flat_coords(grid: Grid2D):
    X, Y = grid.mesh()
    return X.ravel(), Y.ravel()


def _check_finite(vals, sl, grid: Grid2D, what: str):
    bad = ~np.all(np.isfinite(vals), axis=0)
    if bad.any():
        k = sl.start + int(np.flatnonzero(bad)[0])
        i, j = divmod(k, grid.n)
        x, y = grid.coords[i], grid.coords[j]
        raise NumericalError(f"non-finite {what} at node ({i}, {j}) = ({x:.4f}, {y:.4f})")


def F_projection(U: np.ndarray, f: Nonlinearity, basis: TimeBasis, grid: Grid2D) -> np.ndarray:
    """f_m(x) = int_0^T F(x, sum u_n psi_n, sum grad u_n psi_n) psi_m dt."""
    N = basis.N
    shape = U.shape
    Uf = U.reshape(N, -1)
    G = gradient(U, grid.h).reshape(2, N, -1)
    X, Y = _flat_coords(grid)
    psiT = basis.psi.T
    pw = basis.psi * basis.quad.weights
    out = np.empty_like(Uf)
    for sl in _node_chunks(Uf.shape[1]):
        u = psiT @ Uf[:, sl]
        gx = psiT @ G[0][:, sl]
        gy = psiT @ G[1][:, sl]
        vals = f.F(X[sl], Y[sl], u, gx, gy)
        _check_finite(vals, sl, grid, "F")
        out[:, sl] = pw @ vals
    return out.reshape(shape)


def DF_projection(U: np.ndarray, H: np.ndarray, f: Nonlinearity, basis: TimeBasis, grid: Grid2D) -> np.ndarray:
    """Directional derivative of :func:`F_projection` at U along H."""
    N = basis.N
    shape = U.shape
    Uf, Hf = U.reshape(N, -1), H.reshape(N, -1)
    GU = gradient(U, grid.h).reshape(2, N, -1)
    GH = gradient(H, grid.h).reshape(2, N, -1)
    X, Y = _flat_coords(grid)
    psiT = basis.psi.T
    pw = basis.psi * basis.quad.weights
    out = np.empty_like(Uf)
    for sl in _node_chunks(Uf.shape[1]):
        u, gx, gy = psiT @ Uf[:, sl], psiT @ GU[0][:, sl], psiT @ GU[1][:, sl]
        fu = f.dF_du(X[sl], Y[sl], u, gx, gy)
        fx, fy = f.dF_dgrad(X[sl], Y[sl], u, gx, gy)
        vals = fu * (psiT @ Hf[:, sl]) + fx * (psiT @ GH[0][:, sl]) + fy * (psiT @ GH[1][:, sl])
        _check_finite(vals, sl, grid, "DF")
        out[:, sl] = pw @ vals
    return out.reshape(shape)


@dataclass
class LinearizationBlocks:
    """Per-node N x N matrices of the Frechet derivative of F_projection.

    ``DF(U)(h)_m = sum_n u[m, n] h_n + gx[m, n] dh_n/dx + gy[m, n] dh_n/dy``
    with each array of shape (n*n, N, N); ``gx``/``gy`` are None when F does
    not depend on the gradient.
    """

    u: np.ndarray
    gx: np.ndarray | None
    gy: np.ndarray | None


def linearization_blocks(U: np.ndarray, f: Nonlinearity, basis: TimeBasis, grid: Grid2D) -> LinearizationBlocks:
    N = basis.N
    Uf = U.reshape(N, -1)
    P = Uf.shape[1]
    GU = gradient(U, grid.h).reshape(2, N, -1)
    X, Y = _flat_coords(grid)
    psiT = basis.psi.T
    # products[m * N + n, t] = w_t psi_m(t) psi_n(t)
    products = (basis.psi[:, None, :] * basis.psi[None, :, :]).reshape(N * N, -1) * basis.quad.weights
    bu = np.empty((P, N * N))
    bx = np.empty((P, N * N)) if f.needs_gradient else None
    by = np.empty((P, N * N)) if f.needs_gradient else None
    for sl in _node_chunks(P):
        u, gx, gy = psiT @ Uf[:, sl], psiT @ GU[0][:, sl], psiT @ GU[1][:, sl]
        fu = np.broadcast_to(f.dF_du(X[sl], Y[sl], u, gx, gy), u.shape)
        _check_finite(fu, sl, grid, "dF/du")
        bu[sl] = (products @ fu).T
        if bx is not None:
            fx, fy = f.dF_dgrad(X[sl], Y[sl], u, gx, gy)
            fx, fy = np.broadcast_to(fx, u.shape), np.broadcast_to(fy, u.shape)
            _check_finite(fx + fy, sl, grid, "dF/dgrad")
            bx[sl] = (products @ fx).T
            by[sl] = (products @ fy).T
    rs = (P, N, N)
    return LinearizationBlocks(bu.reshape(rs), None if bx is None else bx.reshape(rs), None if by is None else by.reshape(rs))


def residual(U: np.ndarray, S: np.ndarray, f: Nonlinearity, basis: TimeBasis, grid: Grid2D) -> np.ndarray:
    """L(U) = Lap U - S U + F(x, U, grad U) at interior nodes, zero on the boundary."""
    out = laplacian(U, grid.h) - np.tensordot(S, U, axes=1) + F_projection(U, f, basis, grid)
    out[:, [0, -1], :] = 0.0
    out[:, :, [0, -1]] = 0.0
    return out
