"""End-to-end runs: forward data, noise, inversion, diagnostics."""
from __future__ import annotations

import logging
import time
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError
from .experiment import ExperimentConfig, ResultBundle
from .forward import BoundaryTraces, apply_noise, extract_traces, run_forward
from .newton import initial_guess, iterate, metrics, reconstruct_source
from .nonlinearity import get_nonlinearity
from .phantoms import PHANTOMS, get_phantom
from .spectral import boundary_coeffs, residual
from .time_basis import build_basis, stiffness, truncation_error

logger = logging.getLogger(__name__)


def simulate(cfg: ExperimentConfig) -> BoundaryTraces:
    """Noiseless lateral Cauchy data for the configured phantom."""
    f = get_nonlinearity(cfg.nonlinearity.name, cfg.nonlinearity.cutoff_B)
    phantom = get_phantom(cfg.phantom.name)
    result = run_forward(phantom, f, cfg.outer_grid, cfg.time.T, cfg.time.nt, R=cfg.domain.R)
    meta = {
        "R": cfg.domain.R,
        "R1": cfg.domain.R1,
        "n1": cfg.grid.n1,
        "T": cfg.time.T,
        "nt": cfg.time.nt,
        "nonlinearity": cfg.nonlinearity.name,
        "phantom": cfg.phantom.name,
    }
    return extract_traces(result, meta)


def add_noise(traces: BoundaryTraces, cfg: ExperimentConfig) -> BoundaryTraces:
    return apply_noise(traces, cfg.noise.delta, cfg.noise.seed)


def _check_compatible(traces: BoundaryTraces, cfg: ExperimentConfig) -> None:
    m = traces.meta
    pairs = [("R", cfg.domain.R), ("R1", cfg.domain.R1), ("n1", cfg.grid.n1), ("T", cfg.time.T), ("nt", cfg.time.nt)]
    for key, want in pairs:
        if key in m and float(m[key]) != float(want):
            raise ConfigError(f"traces were generated with {key}={m[key]} but the config has {want}")
    if traces.first_index != 0 or traces.times.size != cfg.time.nt + 1:
        raise ConfigError("inversion needs traces covering the full time interval")


def interior_residual_l2(U, S, f, basis, grid) -> float:
    L = residual(U, S, f, basis, grid)
    return float(np.sqrt(grid.h**2 * np.sum(L * L)))


def invert(traces: BoundaryTraces, cfg: ExperimentConfig, progress=None) -> ResultBundle:
    """Steps 2-4: project the data, iterate, and reconstruct p."""
    _check_compatible(traces, cfg)
    timing = {}
    t0 = time.perf_counter()
    basis = build_basis(cfg.time.T, cfg.time.nt, cfg.basis.N, rule=cfg.basis.rule)
    S = stiffness(basis)
    data = boundary_coeffs(traces, basis)
    timing["basis"] = time.perf_counter() - t0

    grid = traces.grid
    f = get_nonlinearity(cfg.nonlinearity.name, cfg.nonlinearity.cutoff_B)
    params = cfg.carleman_params
    sc = cfg.solver
    solver_kw = dict(solver=sc.method, max_lsq_iters=sc.max_lsq_iters, lsq_tol=sc.lsq_tol)

    t0 = time.perf_counter()
    U0 = initial_guess(data, S, params, sc.epsilon, basis, grid, **solver_kw)
    timing["initial_guess"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    U, hist = iterate(
        U0, S, f, basis, grid, params, sc.epsilon,
        kappa0=cfg.newton.kappa0, max_iters=cfg.newton.max_iters, progress=progress, **solver_kw,
    )
    timing["iterate"] = time.perf_counter() - t0

    p = reconstruct_source(U, basis)
    name = traces.meta.get("phantom", cfg.phantom.name)
    if name in PHANTOMS:
        m = metrics(p, get_phantom(name), grid)
    else:
        m = {"peak_comp": float(p.max())}
    m["iterations"] = len(hist)
    m["final_increment"] = hist.inc_inf[-1]
    m["residual_l2"] = interior_residual_l2(U, S, f, basis, grid)
    return ResultBundle(p, grid, hist, m, cfg, timing)


def run_full(cfg: ExperimentConfig, progress=None) -> tuple[BoundaryTraces, ResultBundle]:
    t0 = time.perf_counter()
    traces = add_noise(simulate(cfg), cfg)
    fwd = time.perf_counter() - t0
    bundle = invert(traces, cfg, progress=progress)
    bundle.timing["forward"] = fwd
    return traces, bundle


@dataclass
class TruncationDiagnostic:
    """e_N(x, t) on the top side of the inversion boundary for one N."""

    N: int
    x: np.ndarray
    times: np.ndarray
    error: np.ndarray  # (n_nodes, n_times)

    @property
    def max(self) -> float:
        return float(self.error.max())

    @property
    def l2(self) -> float:
        w = self.times[1] - self.times[0]
        h = self.x[1] - self.x[0] if self.x.size > 1 else 1.0
        return float(np.sqrt(w * h * np.sum(self.error**2)))


def basis_diagnostic(traces: BoundaryTraces, N_list, rule: str = "exact") -> list[TruncationDiagnostic]:
    """Truncation error of the Dirichlet trace on Gamma = {y = R} for each N."""
    top = traces.bindex.side_mask("top")
    x = traces.grid.coords[traces.bindex.i[top]]
    series = traces.g0[top]
    T = float(traces.times[-1])
    nt = traces.times.size - 1
    out = []
    for N in N_list:
        basis = build_basis(T, nt, int(N), rule=rule)
        out.append(TruncationDiagnostic(int(N), x, traces.times, truncation_error(series, basis)))
    return out


def diagnostic_csv(diag: TruncationDiagnostic) -> str:
    lines = ["x,t,e"]
    for k, xv in enumerate(diag.x):
        for t, e in zip(diag.times, diag.error[k]):
            lines.append(f"{xv:.17g},{t:.17g},{e:.17g}")
    return "\n".join(lines) + "\n"
