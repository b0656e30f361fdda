"""Experiment configuration and on-disk formats.

Configs are flat ``section.key=value`` lines with ``#`` comments.  Traces are
a ``.meta`` key=value file plus a little-endian float64 ``.bin`` payload.
"""
from __future__ import annotations

import dataclasses
import os
import tempfile
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Optional

import numpy as np

from .carleman import CarlemanParams
from .errors import ConfigError
from .forward import BoundaryTraces
from .grid import Grid2D, boundary_index, restrict_grid
from .nonlinearity import NONLINEARITIES
from .phantoms import PHANTOMS
from .time_basis import RULES

FORMAT_VERSION = 1
SOLVERS = ("direct", "lsqr", "dense")


@dataclass
class DomainConfig:
    R: float = 1.0
    R1: float = 6.0


@dataclass
class GridConfig:
    n1: int = 240


@dataclass
class TimeConfig:
    T: float = 1.5
    nt: int = 3000


@dataclass
class BasisConfig:
    N: int = 35
    rule: str = "exact"


@dataclass
class CarlemanConfig:
    x0x: float = 0.0
    x0y: float = 1.5
    b: float = 5.0
    # "lambda" is the config key; the attribute avoids the Python keyword.
    lam: float = 40.0
    beta: float = 10.0


@dataclass
class SolverConfig:
    epsilon: float = 1e-7
    method: str = "direct"
    max_lsq_iters: int = 20000
    lsq_tol: float = 1e-12


@dataclass
class NewtonConfig:
    max_iters: int = 6
    kappa0: float = 1e-6


@dataclass
class NoiseConfig:
    delta: float = 0.0
    seed: int = 0


@dataclass
class PhantomConfig:
    name: str = "disk8"


@dataclass
class NonlinearityConfig:
    name: str = "fisher"
    cutoff_B: Optional[float] = None


@dataclass
class ExperimentConfig:
    domain: DomainConfig = field(default_factory=DomainConfig)
    grid: GridConfig = field(default_factory=GridConfig)
    time: TimeConfig = field(default_factory=TimeConfig)
    basis: BasisConfig = field(default_factory=BasisConfig)
    carleman: CarlemanConfig = field(default_factory=CarlemanConfig)
    solver: SolverConfig = field(default_factory=SolverConfig)
    newton: NewtonConfig = field(default_factory=NewtonConfig)
    noise: NoiseConfig = field(default_factory=NoiseConfig)
    phantom: PhantomConfig = field(default_factory=PhantomConfig)
    nonlinearity: NonlinearityConfig = field(default_factory=NonlinearityConfig)

    @property
    def carleman_params(self) -> CarlemanParams:
        c = self.carleman
        return CarlemanParams((c.x0x, c.x0y), c.b, c.lam, c.beta)

    @property
    def outer_grid(self) -> Grid2D:
        return Grid2D.square(self.domain.R1, self.grid.n1)

    def validate(self) -> "ExperimentConfig":
        d, g, t, b, s, nw, nz = self.domain, self.grid, self.time, self.basis, self.solver, self.newton, self.noise
        checks = [
            (d.R > 0, "domain.R", "domain.R must be positive"),
            (d.R1 > d.R, "domain.R1", "domain.R1 must exceed domain.R"),
            (g.n1 >= 3, "grid.n1", "grid.n1 must be at least 3"),
            (t.T > 0, "time.T", "time.T must be positive"),
            (t.nt >= 1, "time.nt", "time.nt must be positive"),
            (b.N >= 1, "basis.N", "basis.N must be at least 1"),
            (t.nt >= 10 * b.N, "time.nt", f"time.nt must be at least 10 * basis.N = {10 * b.N}"),
            (b.rule in RULES, "basis.rule", f"basis.rule must be one of {RULES}"),
            (s.epsilon > 0, "solver.epsilon", "solver.epsilon must be positive"),
            (s.method in SOLVERS, "solver.method", f"solver.method must be one of {SOLVERS}"),
            (s.max_lsq_iters >= 1, "solver.max_lsq_iters", "solver.max_lsq_iters must be positive"),
            (s.lsq_tol > 0, "solver.lsq_tol", "solver.lsq_tol must be positive"),
            (nw.max_iters >= 1, "newton.max_iters", "newton.max_iters must be at least 1"),
            (nw.kappa0 > 0, "newton.kappa0", "newton.kappa0 must be positive"),
            (nz.delta >= 0, "noise.delta", "noise.delta must be non-negative"),
            (self.phantom.name in PHANTOMS, "phantom.name", f"phantom.name must be one of {sorted(PHANTOMS)}"),
            (self.nonlinearity.name in NONLINEARITIES, "nonlinearity.name", f"nonlinearity.name must be one of {sorted(NONLINEARITIES)}"),
            (self.nonlinearity.cutoff_B is None or self.nonlinearity.cutoff_B > 0, "nonlinearity.cutoff_B", "nonlinearity.cutoff_B must be positive"),
        ]
        for ok, key, msg in checks:
            if not ok:
                raise ConfigError(msg, key=key)
        try:
            self.carleman_params.validate(d.R)
        except ValueError as exc:
            raise ConfigError(str(exc), key="carleman.*") from None
        try:
            restrict_grid(self.outer_grid, d.R)
        except ValueError as exc:
            raise ConfigError(str(exc), key="grid.n1") from None
        return self


_KEY_ALIASES = {"lambda": "lam"}


def _sections():
    return {f.name: f for f in fields(ExperimentConfig)}


def _convert(raw: str, ftype, key: str, line: int):
    ftype = str(ftype)
    try:
        if "Optional" in ftype or "None" in ftype:
            return None if raw.lower() in ("", "none") else float(raw)
        if ftype in ("float", "<class 'float'>"):
            return float(raw)
        if ftype in ("int", "<class 'int'>"):
            return int(raw)
        return raw
    except ValueError:
        raise ConfigError(f"malformed value {raw!r} for {key}", line) from None


def parse_config(text: str) -> ExperimentConfig:
    """Parse key=value config text; unspecified keys keep their defaults."""
    cfg = ExperimentConfig()
    sections = _sections()
    seen = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"expected key=value, got {line!r}", lineno)
        key, value = (p.strip() for p in line.split("=", 1))
        if "." not in key:
            raise ConfigError(f"unknown key {key!r}", lineno)
        sec, name = key.split(".", 1)
        name = _KEY_ALIASES.get(name, name)
        if sec not in sections:
            raise ConfigError(f"unknown key {key!r}", lineno)
        group = getattr(cfg, sec)
        ftypes = {f.name: f.type for f in fields(group)}
        if name not in ftypes:
            raise ConfigError(f"unknown key {key!r}", lineno)
        setattr(group, name, _convert(value, ftypes[name], key, lineno))
        seen[f"{sec}.{name}"] = seen[f"{sec}.*"] = lineno
    try:
        return cfg.validate()
    except ConfigError as exc:
        line = seen.get(exc.key) if exc.key else None
        raise ConfigError(exc.msg, line, exc.key) from None


def load_config(path) -> ExperimentConfig:
    return parse_config(Path(path).read_text())


def fmt_float(x: float) -> str:
    return format(float(x), ".17g")


def dump_config(cfg: ExperimentConfig) -> str:
    """Canonical text form; parse_config(dump_config(c)) == c."""
    inverse = {v: k for k, v in _KEY_ALIASES.items()}
    lines = []
    for sec in fields(cfg):
        group = getattr(cfg, sec.name)
        for f in fields(group):
            v = getattr(group, f.name)
            if v is None:
                s = "none"
            elif isinstance(v, float):
                s = fmt_float(v)
            else:
                s = str(v)
            lines.append(f"{sec.name}.{inverse.get(f.name, f.name)}={s}")
    return "\n".join(lines) + "\n"


def atomic_write(path, data, mode: str = "w") -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, mode) as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _stem(path) -> Path:
    p = Path(path)
    return p.with_suffix("") if p.suffix in (".meta", ".bin") else p


def save_traces(traces: BoundaryTraces, path) -> Path:
    """Write ``<stem>.meta`` and ``<stem>.bin``; returns the stem."""
    stem = _stem(path)
    m = traces.meta
    meta = {
        "R": fmt_float(m["R"]),
        "R1": fmt_float(m["R1"]),
        "n1": str(int(m["n1"])),
        "T": fmt_float(m["T"]),
        "nt": str(int(m["nt"])),
        "delta": fmt_float(traces.delta),
        "seed": "none" if traces.seed is None else str(int(traces.seed)),
        "nonlinearity": str(m.get("nonlinearity", "unknown")),
        "phantom": str(m.get("phantom", "unknown")),
        "first_index": str(traces.first_index),
        "n_samples": str(traces.times.size),
        "format_version": str(FORMAT_VERSION),
    }
    payload = np.stack([traces.g0, traces.g1], axis=1).astype("<f8").tobytes()
    atomic_write(stem.with_suffix(".bin"), payload, "wb")
    atomic_write(stem.with_suffix(".meta"), "".join(f"{k}={v}\n" for k, v in meta.items()))
    return stem


def read_meta(path) -> dict:
    meta = {}
    for line in Path(path).read_text().splitlines():
        line = line.strip()
        if line and not line.startswith("#"):
            k, v = line.split("=", 1)
            meta[k.strip()] = v.strip()
    return meta


def load_traces(path) -> BoundaryTraces:
    stem = _stem(path)
    meta = read_meta(stem.with_suffix(".meta"))
    if meta.get("format_version") != str(FORMAT_VERSION):
        raise ValueError(f"unsupported trace format_version {meta.get('format_version')!r}")
    R, R1, n1 = float(meta["R"]), float(meta["R1"]), int(meta["n1"])
    T, nt = float(meta["T"]), int(meta["nt"])
    first = int(meta.get("first_index", 0))
    count = int(meta.get("n_samples", nt + 1))
    grid, _ = restrict_grid(Grid2D.square(R1, n1), R)
    b = boundary_index(grid)
    raw = np.fromfile(stem.with_suffix(".bin"), dtype="<f8")
    if raw.size != len(b) * 2 * count:
        raise ValueError(f"trace payload has {raw.size} values, expected {len(b) * 2 * count}")
    raw = raw.reshape(len(b), 2, count)
    times = np.linspace(0.0, T, nt + 1)[first : first + count]
    seed = None if meta["seed"] == "none" else int(meta["seed"])
    info = {"R": R, "R1": R1, "n1": n1, "T": T, "nt": nt, "nonlinearity": meta.get("nonlinearity"), "phantom": meta.get("phantom")}
    return BoundaryTraces(grid, b, times, raw[:, 0].copy(), raw[:, 1].copy(), float(meta["delta"]), seed, first, info)


def export_traces_csv(traces: BoundaryTraces, path) -> None:
    b, c = traces.bindex, traces.grid.coords
    nb, nt1 = traces.g0.shape
    cols = [
        np.repeat(b.side, nt1),
        np.repeat(b.i, nt1),
        np.repeat(b.j, nt1),
        np.repeat(c[b.i], nt1),
        np.repeat(c[b.j], nt1),
        np.tile(traces.times, nb),
        traces.g0.ravel(),
        traces.g1.ravel(),
    ]
    lines = ["node_side,node_i,node_j,x,y,t,g0,g1"]
    for s, i, j, x, y, t, a, g in zip(*cols):
        lines.append(f"{s},{i},{j},{fmt_float(x)},{fmt_float(y)},{fmt_float(t)},{fmt_float(a)},{fmt_float(g)}")
    atomic_write(path, "\n".join(lines) + "\n")


@dataclass
class ResultBundle:
    p_comp: np.ndarray
    grid: Grid2D
    history: object
    metrics: dict
    config: ExperimentConfig
    timing: dict = field(default_factory=dict)


def reconstruction_csv(p: np.ndarray, grid: Grid2D) -> str:
    """Row j holds p(x_i, y_j) for all i; the header lists the node coordinates."""
    lines = ["# coords=" + ",".join(fmt_float(c) for c in grid.coords)]
    for j in range(p.shape[1]):
        lines.append(",".join(fmt_float(v) for v in p[:, j]))
    return "\n".join(lines) + "\n"


def read_reconstruction_csv(path) -> tuple[np.ndarray, np.ndarray]:
    lines = Path(path).read_text().splitlines()
    coords = np.array([float(v) for v in lines[0].split("=", 1)[1].split(",")])
    rows = np.array([[float(v) for v in ln.split(",")] for ln in lines[1:]])
    return coords, rows.T


def history_csv(history) -> str:
    lines = ["n,inc_inf,inc_l2,J"]
    for k in range(len(history)):
        lines.append(f"{k + 1},{fmt_float(history.inc_inf[k])},{fmt_float(history.inc_l2[k])},{fmt_float(history.J[k])}")
    return "\n".join(lines) + "\n"


def metrics_text(metrics: dict) -> str:
    out = []
    for k in sorted(metrics):
        v = metrics[k]
        out.append(f"{k}={fmt_float(v) if isinstance(v, (float, np.floating)) else v}")
    return "\n".join(out) + "\n"


def read_metrics(path) -> dict:
    out = {}
    for k, v in read_meta(path).items():
        try:
            out[k] = float(v)
        except ValueError:
            out[k] = v
    return out


def pgm_bytes(p: np.ndarray) -> tuple[bytes, float, float]:
    """8-bit binary PGM, y increasing upwards; returns (data, min, max)."""
    lo, hi = float(p.min()), float(p.max())
    img = np.zeros(p.shape) if hi == lo else (p - lo) / (hi - lo) * 255.0
    img = np.rint(img).astype(np.uint8).T[::-1]
    header = f"P5\n{img.shape[1]} {img.shape[0]}\n255\n".encode()
    return header + img.tobytes(), lo, hi


def save_results(bundle: ResultBundle, outdir, pgm: bool = True) -> Path:
    out = Path(outdir)
    out.mkdir(parents=True, exist_ok=True)
    metrics = dict(bundle.metrics)
    if pgm:
        data, lo, hi = pgm_bytes(bundle.p_comp)
        metrics["pgm_min"], metrics["pgm_max"] = lo, hi
        atomic_write(out / "reconstruction.pgm", data, "wb")
    atomic_write(out / "reconstruction.csv", reconstruction_csv(bundle.p_comp, bundle.grid))
    atomic_write(out / "history.csv", history_csv(bundle.history))
    atomic_write(out / "metrics.txt", metrics_text(metrics))
    atomic_write(out / "config.cfg", dump_config(bundle.config))
    if bundle.timing:
        atomic_write(out / "timing.txt", "".join(f"{k}={v:.3f}\n" for k, v in sorted(bundle.timing.items())))
    return out


def replace_config(cfg: ExperimentConfig, **overrides) -> ExperimentConfig:
    """Copy with ``section__key=value`` overrides, re-validated."""
    new = dataclasses.replace(cfg, **{f.name: dataclasses.replace(getattr(cfg, f.name)) for f in fields(cfg)})
    for k, v in overrides.items():
        sec, name = k.split("__", 1)
        setattr(getattr(new, sec), name, v)
    return new.validate()
