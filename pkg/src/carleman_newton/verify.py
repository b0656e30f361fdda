"""Self-contained oracle checks, shared by the test suite and ``cli verify``."""
from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numpy as np

from .carleman import CarlemanParams, assemble_step, solve_step
from .forward import run_forward
from .grid import Grid2D, laplacian
from .nonlinearity import get_nonlinearity
from .phantoms import get_phantom, heat_kernel_solution
from .spectral import DF_projection, F_projection, LinearizationBlocks
from .time_basis import build_basis, stiffness

DEFAULT_PARAMS = CarlemanParams((0.0, 1.5), 5.0, 40.0, 10.0)


@dataclass
class Check:
    name: str
    value: float
    tol: float
    seconds: float = 0.0

    @property
    def passed(self) -> bool:
        return bool(np.isfinite(self.value) and self.value <= self.tol)

    def line(self) -> str:
        tag = "PASS" if self.passed else "FAIL"
        return f"{tag} {self.name}: {self.value:.3e} (tol {self.tol:.1e}, {self.seconds:.1f}s)"


def psi1_at_zero(T: float) -> float:
    """Closed form of the first orthonormal basis function at t = 0."""
    return math.exp(-T / 2) / math.sqrt(math.sinh(T))


def basis_checks(T: float = 1.5, nt: int = 3000, N: int = 35) -> list[Check]:
    t0 = time.perf_counter()
    basis = build_basis(T, nt, N)
    dt = time.perf_counter() - t0
    ortho = float(np.abs(basis.gram() - np.eye(N)).max())
    S = stiffness(basis)
    # S + S^T = psi(T) psi(T)^T - psi(0) psi(0)^T
    pT, p0 = basis.psi[:, -1], basis.psi[:, 0]
    ibp = float(np.abs(S + S.T - (np.outer(pT, pT) - np.outer(p0, p0))).max())
    psi1 = abs(basis.psi0[0] - psi1_at_zero(T))
    return [
        Check("basis orthonormality", ortho, 1e-8, dt),
        Check("stiffness integration by parts", ibp, 1e-7, dt),
        Check("psi_1(0) closed form", psi1, 1e-10, dt),
        Check("basis build seconds", dt, 5.0, dt),
    ]


def heat_kernel_check(n1: int = 240, R1: float = 6.0, R: float = 1.0, T: float = 1.5, nt: int = 3000) -> Check:
    """Max relative error of the F = 0 solve against the free-space Gaussian kernel on the window."""
    t0 = time.perf_counter()
    grid = Grid2D.square(R1, n1)
    res = run_forward(get_phantom("gaussian"), get_nonlinearity("zero"), grid, T, nt, R=R)
    X, Y = res.window_grid.mesh()
    exact = heat_kernel_solution(X[None], Y[None], res.times[:, None, None])
    err = float(np.abs(res.history - exact).max() / np.abs(exact).max())
    return Check("heat kernel oracle", err, 1e-2, time.perf_counter() - t0)


def _random_state(rng, N, n, scale):
    return scale * rng.standard_normal((N, n, n))


def jacobian_check(name: str, probes: int = 100, tau: float = 1e-6, n: int = 9, N: int = 4, seed: int = 0) -> Check:
    """Worst relative error of DF_projection against central differences."""
    t0 = time.perf_counter()
    rng = np.random.default_rng(seed)
    basis = build_basis(1.5, 200, N)
    grid = Grid2D.square(1.0, n)
    f = get_nonlinearity(name)
    worst = 0.0
    for _ in range(probes):
        U = _random_state(rng, N, n, 0.5)
        H = _random_state(rng, N, n, 1.0)
        d = DF_projection(U, H, f, basis, grid)
        fd = (F_projection(U + tau * H, f, basis, grid) - F_projection(U - tau * H, f, basis, grid)) / (2 * tau)
        worst = max(worst, float(np.linalg.norm(d - fd) / np.linalg.norm(d)))
    return Check(f"jacobian vs finite differences ({name})", worst, 1e-5, time.perf_counter() - t0)


def manufactured_state(N: int, grid: Grid2D) -> np.ndarray:
    X, Y = grid.mesh()
    comps = [np.sin(1.3 * X + 0.7 * m) * np.cos(0.9 * Y - 0.4 * m) + 0.2 * (m + 1) * X * Y for m in range(N)]
    return np.array(comps)


def manufactured_problem(n: int, N: int, eps: float, params: CarlemanParams = DEFAULT_PARAMS):
    """One linear step whose exact minimiser (at eps = 0) is a known smooth state.

    The linear system is Lap U - S U + U = g with g chosen so that the
    manufactured state solves it on the grid; the step starts from that
    state's two boundary layers and a zero core.
    """
    grid = Grid2D.square(1.0, n)
    basis = build_basis(1.5, max(200, 10 * N), N)
    S = stiffness(basis)
    Ustar = manufactured_state(N, grid)

    def op(V):
        return laplacian(V, grid.h) - np.tensordot(S, V, axes=1) + V

    g = op(Ustar)
    V = Ustar.copy()
    V[:, 2:-2, 2:-2] = 0.0
    L = op(V) - g
    L[:, [0, -1], :] = 0.0
    L[:, :, [0, -1]] = 0.0
    eye = np.broadcast_to(np.eye(N), (n * n, N, N))
    problem = assemble_step(V, L, LinearizationBlocks(eye, None, None), S, params, eps, grid)
    return problem, V, Ustar


def manufactured_check(n: int = 21, N: int = 3, eps: float = 1e-10) -> Check:
    t0 = time.perf_counter()
    problem, V, Ustar = manufactured_problem(n, N, eps)
    phi, _ = solve_step(problem, method="direct")
    err = float(np.linalg.norm(V + phi - Ustar) / np.linalg.norm(Ustar))
    return Check(f"manufactured linear Cauchy problem {n}x{n}, N={N}", err, 1e-3, time.perf_counter() - t0)


def iterative_vs_dense_check(n: int = 9, N: int = 2, eps: float = 1e-10) -> Check:
    t0 = time.perf_counter()
    problem, _, _ = manufactured_problem(n, N, eps)
    dense, _ = solve_step(problem, method="dense")
    worst = 0.0
    for method in ("lsqr", "direct"):
        phi, _ = solve_step(problem, method=method)
        worst = max(worst, float(np.linalg.norm(phi - dense) / np.linalg.norm(dense)))
    return Check(f"iterative vs dense solve {n}x{n}, N={N}", worst, 1e-8, time.perf_counter() - t0)


def quick_suite(include_heat_kernel: bool = True) -> list[Check]:
    checks = basis_checks()
    checks += [jacobian_check("fisher", probes=20), jacobian_check("sqrt_gradient", probes=20)]
    checks += [manufactured_check(), iterative_vs_dense_check()]
    if include_heat_kernel:
        checks.append(heat_kernel_check())
    return checks
