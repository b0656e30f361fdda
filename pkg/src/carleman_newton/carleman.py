"""Carleman-weighted quasi-reversibility step for the linearised system.

Each Newton step minimises over increments phi that vanish, together with
their normal derivative, on the boundary:

    J(phi) = sum_x h^2 w(x) |A phi + L(U_prev)|^2 + eps ||U_prev + phi||_{H^2}^2

with A phi = Lap phi - S phi + DF(U_prev)(phi) and w the Carleman weight.
Zero Dirichlet and Neumann data are encoded by fixing the outer node layer
and the first interior layer; the unknowns are the remaining core nodes.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import SolverError
from .grid import Grid2D
from .spectral import LinearizationBlocks

logger = logging.getLogger(__name__)

NORMAL_TOL = 1e-8


@dataclass(frozen=True)
class CarlemanParams:
    x0: tuple[float, float]
    b: float
    lam: float
    beta: float

    def validate(self, half_width: float) -> None:
        x0x, x0y = self.x0
        R = half_width
        if abs(x0x) <= R and abs(x0y) <= R:
            raise ValueError(f"x0={self.x0} must lie outside the closed square [-{R}, {R}]^2")
        corners = np.array([[sx * R, sy * R] for sx in (-1, 1) for sy in (-1, 1)])
        rmax = np.hypot(corners[:, 0] - x0x, corners[:, 1] - x0y).max()
        if self.b <= rmax:
            raise ValueError(f"b={self.b} must exceed max |x - x0| over the domain ({rmax:.4f})")
        if self.lam < 0:
            raise ValueError("lambda must be non-negative")
        if self.beta <= 0:
            raise ValueError("beta must be positive")


def log_weight(params: CarlemanParams, grid: Grid2D) -> np.ndarray:
    X, Y = grid.mesh()
    r = np.hypot(X - params.x0[0], Y - params.x0[1])
    with np.errstate(divide="ignore"):
        return 2.0 * params.lam * np.exp(params.beta * (np.log(r) - np.log(params.b)))


def weight_field(params: CarlemanParams, grid: Grid2D) -> np.ndarray:
    """exp(2 lambda b^-beta r^beta) on the grid, r = |x - x0|."""
    params.validate(grid.half_width)
    return np.exp(log_weight(params, grid))


@dataclass(frozen=True)
class Layout:
    """Node bookkeeping for an n x n inversion grid.

    Residual rows live on interior nodes (1..n-2); unknowns on the core
    nodes (2..n-3).  Vectors are node-major with the N components innermost.
    """

    n: int
    N: int

    @property
    def residual_nodes(self) -> tuple[np.ndarray, np.ndarray]:
        r = np.arange(1, self.n - 1)
        I, J = np.meshgrid(r, r, indexing="ij")
        return I.ravel(), J.ravel()

    @property
    def unknown_nodes(self) -> tuple[np.ndarray, np.ndarray]:
        r = np.arange(2, self.n - 2)
        I, J = np.meshgrid(r, r, indexing="ij")
        return I.ravel(), J.ravel()

    def unknown_map(self) -> np.ndarray:
        """(n, n) array with the unknown-node number or -1 for fixed nodes."""
        m = -np.ones((self.n, self.n), dtype=np.int64)
        I, J = self.unknown_nodes
        m[I, J] = np.arange(I.size)
        return m

    def constrained_mask(self) -> np.ndarray:
        return self.unknown_map() < 0

    @property
    def n_unknowns(self) -> int:
        return max(self.n - 4, 0) ** 2 * self.N

    def scatter(self, vec: np.ndarray) -> np.ndarray:
        out = np.zeros((self.N, self.n, self.n))
        I, J = self.unknown_nodes
        out[:, I, J] = vec.reshape(-1, self.N).T
        return out

    def gather_unknowns(self, field_: np.ndarray) -> np.ndarray:
        I, J = self.unknown_nodes
        return field_[:, I, J].T.ravel()

    def gather_residual(self, field_: np.ndarray) -> np.ndarray:
        I, J = self.residual_nodes
        return field_[:, I, J].T.ravel()


def _block_coo(rows_node, cols_node, blocks, N):
    """COO triplets for dense N x N blocks placed at (rows_node, cols_node)."""
    m = np.arange(N)
    r = rows_node[:, None, None] * N + m[None, :, None]
    c = cols_node[:, None, None] * N + m[None, None, :]
    r, c = np.broadcast_arrays(r, c)
    return r.ravel(), c.ravel(), blocks.ravel()


def _diag_coo(rows_node, cols_node, vals, N):
    m = np.arange(N)
    r = (rows_node[:, None] * N + m).ravel()
    c = (cols_node[:, None] * N + m).ravel()
    return r, c, np.broadcast_to(vals[:, None], (rows_node.size, N)).ravel()


def linear_operator(layout: Layout, h: float, S: np.ndarray, blocks: LinearizationBlocks | None) -> sp.csr_matrix:
    """Sparse matrix of phi -> Lap phi - S phi + DF(phi) on residual rows, unknown columns."""
    n, N = layout.n, layout.N
    umap = layout.unknown_map()
    I, J = layout.residual_nodes
    ridx = np.arange(I.size)
    node = I * n + J
    eye = np.eye(N)
    trip = []

    center = np.broadcast_to(-4.0 / h**2 * eye - S, (I.size, N, N))
    if blocks is not None:
        center = center + blocks.u[node]
    k = umap[I, J]
    ok = k >= 0
    trip.append(_block_coo(ridx[ok], k[ok], center[ok], N))

    for (di, dj), grad, sign in (
        ((1, 0), "gx", 1.0),
        ((-1, 0), "gx", -1.0),
        ((0, 1), "gy", 1.0),
        ((0, -1), "gy", -1.0),
    ):
        k = umap[I + di, J + dj]
        ok = k >= 0
        g = None if blocks is None else getattr(blocks, grad)
        if g is None:
            trip.append(_diag_coo(ridx[ok], k[ok], np.full(ok.sum(), 1.0 / h**2), N))
        else:
            blk = eye / h**2 + sign / (2 * h) * g[node[ok]]
            trip.append(_block_coo(ridx[ok], k[ok], blk, N))

    rows = np.concatenate([t[0] for t in trip])
    cols = np.concatenate([t[1] for t in trip])
    vals = np.concatenate([t[2] for t in trip])
    return sp.csr_matrix((vals, (rows, cols)), shape=(I.size * N, layout.n_unknowns))


def h2_operator(n: int, N: int, h: float) -> sp.csr_matrix:
    """R with ||R v||^2 the discrete H^2 norm squared of a full-grid state.

    Blocks: identity, forward first differences in x and y, second
    differences xx and yy, and the centred mixed difference (counted twice,
    as in the Frobenius norm of the Hessian).  Each block carries the h^2
    node quadrature weight.
    """
    I1 = sp.identity(n, format="csr")
    fwd = sp.diags([-np.ones(n), np.ones(n - 1)], [0, 1], shape=(n - 1, n)) / h
    sec = sp.diags([np.ones(n - 2), -2 * np.ones(n - 2), np.ones(n - 2)], [0, 1, 2], shape=(n - 2, n)) / h**2
    cen = sp.diags([-np.ones(n - 2), np.ones(n - 2)], [0, 2], shape=(n - 2, n)) / (2 * h)
    blocks = [
        sp.kron(I1, I1),
        sp.kron(fwd, I1),
        sp.kron(I1, fwd),
        sp.kron(sec, I1),
        sp.kron(I1, sec),
        np.sqrt(2.0) * sp.kron(cen, cen),
    ]
    R = h * sp.vstack(blocks, format="csr")
    return sp.kron(R, sp.identity(N), format="csr")


def h2_norm_sq(V: np.ndarray, h: float) -> float:
    N, n, _ = V.shape
    R = h2_operator(n, N, h)
    v = R @ V.reshape(N, -1).T.ravel()
    return float(v @ v)


@dataclass
class LinearStepProblem:
    layout: Layout
    A: sp.csr_matrix
    q: np.ndarray  # per-row weights h^2 w(x)
    L: np.ndarray  # L(U_prev) on residual rows
    R: sp.csr_matrix  # H^2 operator restricted to unknown columns
    r0: np.ndarray  # H^2 operator applied to U_prev
    eps: float
    weight: np.ndarray = field(repr=False)

    def J(self, phi: np.ndarray) -> float:
        res = self.A @ phi + self.L
        reg = self.R @ phi + self.r0
        return float(res @ (self.q * res) + self.eps * (reg @ reg))

    def normal_matrix(self) -> sp.csc_matrix:
        Aq = sp.diags(self.q) @ self.A
        return (self.A.T @ Aq + self.eps * (self.R.T @ self.R)).tocsc()

    def normal_rhs(self) -> np.ndarray:
        return -(self.A.T @ (self.q * self.L) + self.eps * (self.R.T @ self.r0))


def assemble_step(
    U_prev: np.ndarray,
    L_prev: np.ndarray,
    blocks: LinearizationBlocks | None,
    S: np.ndarray,
    params: CarlemanParams,
    eps: float,
    grid: Grid2D,
) -> LinearStepProblem:
    """Build the weighted least-squares problem for one Newton increment.

    ``L_prev`` is the residual L(U_prev) and ``blocks`` the linearisation of
    F at U_prev (None means DF = 0).
    """
    if not eps > 0:
        raise ValueError(f"regularisation parameter must be positive, got {eps}")
    N, n, _ = U_prev.shape
    layout = Layout(n, N)
    if layout.n_unknowns == 0:
        raise ValueError(f"grid with {n} points per axis leaves no unknown nodes")
    A = linear_operator(layout, grid.h, S, blocks)
    w = weight_field(params, grid)
    I, J = layout.residual_nodes
    q = np.repeat(grid.h**2 * w[I, J], N)
    umap = layout.unknown_map()
    full = h2_operator(n, N, grid.h)
    cols = (np.flatnonzero(umap.ravel() >= 0)[:, None] * N + np.arange(N)).ravel()
    R = full[:, cols].tocsr()
    r0 = full @ U_prev.reshape(N, -1).T.ravel()
    return LinearStepProblem(layout, A, q, layout.gather_residual(L_prev), R, r0, float(eps), w)


@dataclass
class StepInfo:
    J0: float
    J: float
    normal_residual: float
    iterations: int
    method: str


def solve_step(problem: LinearStepProblem, method: str = "direct", max_iters: int = 20000, tol: float = 1e-12):
    """Minimise J over the unknowns.  Returns (increment field, StepInfo).

    ``method`` is ``"direct"`` (sparse LU of the normal equations, one step
    of iterative refinement), ``"lsqr"`` (column-scaled LSQR on the stacked
    weighted system) or ``"dense"`` (small problems only).
    """
    rhs = problem.normal_rhs()
    iters = 0
    if method in ("direct", "dense"):
        M = problem.normal_matrix()
        if method == "dense":
            phi = np.linalg.solve(M.toarray(), rhs)
        else:
            lu = spla.splu(M, permc_spec="MMD_AT_PLUS_A")
            phi = lu.solve(rhs)
            phi += lu.solve(rhs - M @ phi)
        res = np.linalg.norm(M @ phi - rhs)
    elif method == "lsqr":
        sq = np.sqrt(problem.q)
        K = sp.vstack([sp.diags(sq) @ problem.A, np.sqrt(problem.eps) * problem.R], format="csr")
        b = -np.concatenate([sq * problem.L, np.sqrt(problem.eps) * problem.r0])
        colnorm = np.sqrt(np.asarray(K.multiply(K).sum(axis=0)).ravel())
        colnorm[colnorm == 0] = 1.0
        D = sp.diags(1.0 / colnorm)
        out = spla.lsqr(K @ D, b, atol=tol, btol=tol, iter_lim=max_iters)
        phi = D @ out[0]
        iters = int(out[2])
        g = K.T @ (K @ phi - b)
        res = np.linalg.norm(g)
    else:
        raise ValueError(f"unknown solver {method!r}")

    if not np.all(np.isfinite(phi)):
        raise SolverError("linear solve produced non-finite values")
    scale = np.linalg.norm(rhs)
    rel = float(res / scale) if scale > 0 else float(res)
    if rel > NORMAL_TOL:
        logger.warning("normal-equation residual %.2e above %.0e (%s, %d iterations)", rel, NORMAL_TOL, method, iters)
    J0 = problem.J(np.zeros_like(phi))
    J1 = problem.J(phi)
    if J1 > J0 * (1 + 1e-10) + 1e-300:
        raise SolverError(f"step increased the functional: J(h)={J1:.6e} > J(0)={J0:.6e}")
    return problem.layout.scatter(phi), StepInfo(J0, J1, rel, iters, method)


def dump_operator(problem: LinearStepProblem, path) -> None:
    """Write A as 0-based ``row col value`` lines."""
    A = problem.A.tocoo()
    with open(path, "w") as fh:
        for r, c, v in zip(A.row, A.col, A.data):
            fh.write(f"{r} {c} {v:.17g}\n")
