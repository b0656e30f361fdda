"""Orthonormal exponential-polynomial basis of L2(0, T).

The basis is the Gram-Schmidt orthonormalisation of
``phi_n(t) = t**(n-1) * exp(t - T/2)``.  Orthonormalising the raw monomials
directly is hopeless past n ~ 15 in double precision, so the same nested
subspaces are swept in Krylov order (``t * psi_{n-1}`` instead of
``phi_n``), with modified Gram-Schmidt applied twice.  In exact arithmetic
the two sweeps produce identical functions.

Time integrals use a rule on the uniform nodes ``t_k = k T / nt``.  The
default ``"exact"`` rule is the Gregory end-corrected trapezoid rule plus a
minimal weighted correction that makes it exact on every product
``psi_m * psi_n`` and ``psi_m' * psi_n``; without it the highest modes are
under-resolved near the end points and the integration by parts identity
for the stiffness matrix fails at the 1e-1 level for N = 35.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from numpy.polynomial import legendre

logger = logging.getLogger(__name__)

ORTHO_TOL = 1e-8
IBP_TOL = 1e-6
RULES = ("exact", "gregory", "trapezoid")


class BasisError(ValueError):
    """Raised when a basis cannot be built to the required accuracy."""


@dataclass(frozen=True)
class QuadratureGrid:
    T: float
    nt: int
    nodes: np.ndarray
    weights: np.ndarray
    rule: str

    def integrate(self, values: np.ndarray) -> np.ndarray:
        """Integrate samples along the last axis."""
        return values @ self.weights


def _gregory_weights(nt: int, T: float) -> np.ndarray:
    h = T / nt
    w = np.full(nt + 1, h)
    ends = np.array([3 / 8, 7 / 6, 23 / 24]) * h
    w[:3] = ends
    w[-3:] = ends[::-1]
    return w


def _trapezoid_weights(nt: int, T: float) -> np.ndarray:
    w = np.full(nt + 1, T / nt)
    w[[0, -1]] *= 0.5
    return w


def _exact_correction(t: np.ndarray, w: np.ndarray, T: float, degree: int) -> np.ndarray:
    # Columns: Legendre(s) * exp(2t - T) for degrees 0..degree, plus the constant 1.
    s = 2.0 * t / T - 1.0
    V = np.hstack([legendre.legvander(s, degree) * np.exp(2 * t - T)[:, None],
                   np.ones((t.size, 1))])
    xg, wg = legendre.leggauss(max(200, 2 * degree + 60))
    tg = (xg + 1.0) * T / 2
    wg = wg * T / 2
    moments = np.concatenate([(legendre.legvander(xg, degree) * np.exp(2 * tg - T)[:, None]).T @ wg, [T]])
    resid = moments - V.T @ w
    # Minimise sum(dw**2 / w) subject to V.T (w + dw) = moments.
    WV = V * w[:, None]
    dw = WV @ np.linalg.solve(V.T @ WV, resid)
    return w + dw


def quadrature_grid(T: float, nt: int, rule: str = "exact", N: int = 1) -> QuadratureGrid:
    """Uniform nodes on [0, T] and positive weights summing to T.

    ``N`` only matters for the ``"exact"`` rule, which is made exact on
    ``q(t) exp(2t - T)`` for polynomials q of degree < 2N.
    """
    if T <= 0:
        raise BasisError(f"T must be positive, got {T}")
    if nt < 6:
        raise BasisError(f"need at least 6 subintervals, got {nt}")
    if rule not in RULES:
        raise BasisError(f"unknown quadrature rule {rule!r}")
    t = np.linspace(0.0, T, nt + 1)
    if rule == "trapezoid":
        w = _trapezoid_weights(nt, T)
    else:
        w = _gregory_weights(nt, T)
        if rule == "exact":
            w = _exact_correction(t, w, T, 2 * N - 1)
    if np.any(w <= 0):
        raise BasisError("quadrature correction produced non-positive weights; increase nt")
    w.setflags(write=False)
    t.setflags(write=False)
    return QuadratureGrid(T=float(T), nt=int(nt), nodes=t, weights=w, rule=rule)


@dataclass(frozen=True)
class TimeBasis:
    """Sampled orthonormal basis psi_1..psi_N and its derivatives.

    ``psi`` and ``dpsi`` have shape (N, nt + 1).  ``recurrence`` holds the
    Gram-Schmidt coefficients of the Krylov sweep so the basis can be
    evaluated off the quadrature nodes (see :meth:`evaluate`).
    """

    quad: QuadratureGrid
    psi: np.ndarray
    dpsi: np.ndarray
    gs_coeffs: np.ndarray
    recurrence: np.ndarray
    derivative: str

    @property
    def N(self) -> int:
        return self.psi.shape[0]

    @property
    def T(self) -> float:
        return self.quad.T

    @property
    def nt(self) -> int:
        return self.quad.nt

    @property
    def nodes(self) -> np.ndarray:
        return self.quad.nodes

    @property
    def psi0(self) -> np.ndarray:
        return self.psi[:, 0]

    def gram(self) -> np.ndarray:
        return (self.psi * self.quad.weights) @ self.psi.T

    def evaluate(self, t) -> np.ndarray:
        """Evaluate psi_1..psi_N at arbitrary times by replaying the sweep."""
        t = np.asarray(t, dtype=float)
        H = self.recurrence
        out = np.empty((self.N,) + t.shape)
        out[0] = np.exp(t - self.T / 2) / H[0, 0]
        for n in range(1, self.N):
            v = t * out[n - 1] - np.tensordot(H[:n, n], out[:n], axes=1)
            out[n] = v / H[n, n]
        return out


def _sbp_derivative(values: np.ndarray, T: float, nt: int) -> np.ndarray:
    # Second-order summation-by-parts operator for the trapezoid norm.
    h = T / nt
    d = np.empty_like(values)
    d[..., 1:-1] = (values[..., 2:] - values[..., :-2]) / (2 * h)
    d[..., 0] = (values[..., 1] - values[..., 0]) / h
    d[..., -1] = (values[..., -1] - values[..., -2]) / h
    return d


def _ibp_defect(psi: np.ndarray, dpsi: np.ndarray, w: np.ndarray) -> float:
    S = (psi * w) @ dpsi.T
    boundary = np.outer(psi[:, -1], psi[:, -1]) - np.outer(psi[:, 0], psi[:, 0])
    return float(np.abs(S + S.T - boundary).max())


def build_basis(T: float, nt: int, N: int, rule: str = "exact") -> TimeBasis:
    """Build the orthonormal basis of size N on nt + 1 uniform nodes."""
    if N < 1:
        raise BasisError(f"basis size must be >= 1, got {N}")
    if nt < 10 * N:
        raise BasisError(f"nt={nt} too coarse for N={N}; need nt >= {10 * N}")
    quad = quadrature_grid(T, nt, rule=rule, N=N)
    t, w = quad.nodes, quad.weights

    psi = np.zeros((N, nt + 1))
    dpsi = np.zeros((N, nt + 1))
    coeffs = np.zeros((N, N))
    # recurrence[j, n] for j < n: projection coefficients; recurrence[n, n]: norm.
    rec = np.zeros((N, N))

    v = np.exp(t - T / 2)
    dv = v.copy()
    c = np.zeros(N)
    c[0] = 1.0
    for n in range(N):
        if n > 0:
            v = t * psi[n - 1]
            dv = psi[n - 1] + t * dpsi[n - 1]
            c = np.zeros(N)
            c[1:] = coeffs[n - 1, :-1]
            for _ in range(2):
                for j in range(n):
                    proj = np.dot(w * v, psi[j])
                    v = v - proj * psi[j]
                    dv = dv - proj * dpsi[j]
                    c = c - proj * coeffs[j]
                    rec[j, n] += proj
        norm = np.sqrt(np.dot(w * v, v))
        if not np.isfinite(norm) or norm == 0.0:
            raise BasisError(f"basis function {n + 1} degenerated to zero")
        rec[n, n] = norm
        psi[n] = v / norm
        dpsi[n] = dv / norm
        coeffs[n] = c / norm

    gram = (psi * w) @ psi.T
    defect = np.abs(gram - np.eye(N)).max()
    if defect > ORTHO_TOL:
        raise BasisError(f"orthonormality defect {defect:.2e} exceeds {ORTHO_TOL:g}; N={N} too large for nt={nt}")

    derivative = "analytic"
    ibp = _ibp_defect(psi, dpsi, w)
    if ibp > IBP_TOL:
        logger.warning("analytic derivatives fail integration by parts (%.2e); using finite differences", ibp)
        dpsi = _sbp_derivative(psi, T, nt)
        derivative = "sbp"

    for arr in (psi, dpsi, coeffs, rec):
        arr.setflags(write=False)
    return TimeBasis(quad=quad, psi=psi, dpsi=dpsi, gs_coeffs=coeffs, recurrence=rec, derivative=derivative)


def raw_functions(t, T: float, N: int) -> np.ndarray:
    """The un-orthonormalised functions t**(n-1) exp(t - T/2), n = 1..N."""
    t = np.asarray(t, dtype=float)
    return np.power.outer(t, np.arange(N)).T * np.exp(t - T / 2)


def stiffness(basis: TimeBasis) -> np.ndarray:
    """S[m, n] = integral of psi_n'(t) psi_m(t) over (0, T)."""
    return (basis.psi * basis.quad.weights) @ basis.dpsi.T


def project(trace: np.ndarray, basis: TimeBasis) -> np.ndarray:
    """Fourier coefficients of time series along their last axis."""
    trace = np.asarray(trace, dtype=float)
    if trace.shape[-1] != basis.nt + 1:
        raise ValueError(f"trace has {trace.shape[-1]} samples, basis expects {basis.nt + 1}")
    return (trace * basis.quad.weights) @ basis.psi.T


def synthesize(coeffs: np.ndarray, basis: TimeBasis) -> np.ndarray:
    """Inverse of :func:`project` on the span: sum_n c_n psi_n(t)."""
    return np.asarray(coeffs) @ basis.psi


def truncation_error(trace: np.ndarray, basis: TimeBasis) -> np.ndarray:
    """Pointwise |u(t) - sum_n u_n psi_n(t)| for each series."""
    trace = np.asarray(trace, dtype=float)
    return np.abs(trace - synthesize(project(trace, basis), basis))


def export_csv(basis: TimeBasis, path) -> None:
    header = "t," + ",".join(f"psi_{n + 1}" for n in range(basis.N))
    data = np.column_stack([basis.nodes, basis.psi.T])
    np.savetxt(Path(path), data, delimiter=",", header=header, comments="", fmt="%.17g")
