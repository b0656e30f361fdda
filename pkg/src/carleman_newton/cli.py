"""Command-line entry point: ``carleman-newton <command> [options]``."""
from __future__ import annotations

import argparse
import logging
import sys
from importlib import resources
from pathlib import Path

from .errors import ConfigError, NumericalError
from .experiment import atomic_write, export_traces_csv, load_config, load_traces, save_results, save_traces
from .time_basis import BasisError

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL, EXIT_IO = 0, 1, 2, 3


def shipped_configs() -> list[str]:
    return sorted(p.name for p in resources.files("carleman_newton").joinpath("configs").iterdir() if p.name.endswith(".cfg"))


def resolve_config(name: str) -> Path:
    """A path on disk, or the name of a config shipped with the package."""
    p = Path(name)
    if p.exists():
        return p
    shipped = resources.files("carleman_newton").joinpath("configs", p.name)
    if shipped.is_file():
        return Path(str(shipped))
    raise FileNotFoundError(f"config file not found: {name}")


def _progress(quiet: bool):
    if quiet:
        return None

    def report(it, hist):
        print(
            f"iteration {it}: inc_inf={hist.inc_inf[-1]:.4e} inc_l2={hist.inc_l2[-1]:.4e} J={hist.J[-1]:.4e}",
            file=sys.stderr,
            flush=True,
        )

    return report


def _say(args, msg: str) -> None:
    if not args.quiet:
        print(msg, file=sys.stderr, flush=True)


def _read_traces(path):
    try:
        return load_traces(path)
    except (ValueError, KeyError) as exc:
        raise OSError(f"unreadable traces {path}: {exc}") from None


def _require(args, *names):
    for name in names:
        if getattr(args, name) is None:
            raise ConfigError(f"--{name.replace('_', '-')} is required for '{args.command}'")


def cmd_forward(args) -> int:
    from .pipeline import add_noise, simulate

    _require(args, "config", "out")
    cfg = load_config(resolve_config(args.config))
    _say(args, f"forward solve: n1={cfg.grid.n1} nt={cfg.time.nt} phantom={cfg.phantom.name}")
    traces = add_noise(simulate(cfg), cfg)
    stem = save_traces(traces, Path(args.out) / "traces")
    if args.csv:
        export_traces_csv(traces, Path(args.out) / "traces.csv")
    _say(args, f"wrote {stem}.meta/.bin")
    return EXIT_OK


def cmd_invert(args) -> int:
    from .pipeline import invert

    _require(args, "config", "out", "traces")
    cfg = load_config(resolve_config(args.config))
    traces = _read_traces(args.traces)
    bundle = invert(traces, cfg, progress=_progress(args.quiet))
    save_results(bundle, args.out)
    _say(args, f"peak_comp={bundle.metrics['peak_comp']:.4f}; results in {args.out}")
    return EXIT_OK


def cmd_full(args) -> int:
    from .pipeline import run_full

    _require(args, "config", "out")
    cfg = load_config(resolve_config(args.config))
    _say(args, f"full run: n1={cfg.grid.n1} N={cfg.basis.N} delta={cfg.noise.delta} phantom={cfg.phantom.name}")
    traces, bundle = run_full(cfg, progress=_progress(args.quiet))
    out = Path(args.out)
    save_traces(traces, out / "traces")
    save_results(bundle, out)
    _say(args, f"peak_comp={bundle.metrics['peak_comp']:.4f}; results in {out}")
    return EXIT_OK


def cmd_basis_diag(args) -> int:
    from .pipeline import basis_diagnostic, diagnostic_csv

    _require(args, "traces", "out")
    try:
        N_list = [int(v) for v in args.N_list.split(",") if v.strip()]
    except ValueError:
        raise ConfigError(f"--N-list must be comma-separated integers, got {args.N_list!r}") from None
    if not N_list or min(N_list) < 1:
        raise ConfigError("--N-list needs at least one positive integer")
    rule = load_config(resolve_config(args.config)).basis.rule if args.config else "exact"
    traces = _read_traces(args.traces)
    out = Path(args.out)
    summary = ["N,max_e,l2_e"]
    for d in basis_diagnostic(traces, N_list, rule=rule):
        atomic_write(out / f"e_N{d.N}.csv", diagnostic_csv(d))
        summary.append(f"{d.N},{d.max:.17g},{d.l2:.17g}")
        _say(args, f"N={d.N}: max e_N on top side {d.max:.3e}, L2 {d.l2:.3e}")
    atomic_write(out / "summary.csv", "\n".join(summary) + "\n")
    return EXIT_OK


def cmd_verify(args) -> int:
    from .verify import quick_suite

    checks = quick_suite(include_heat_kernel=not args.skip_forward)
    for c in checks:
        print(c.line())
    return EXIT_OK if all(c.passed for c in checks) else EXIT_NUMERICAL


COMMANDS = {
    "forward": cmd_forward,
    "invert": cmd_invert,
    "full": cmd_full,
    "basis-diag": cmd_basis_diag,
    "verify": cmd_verify,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="config file, or the name of a shipped config")
    common.add_argument("--out", help="output directory")
    common.add_argument("--quiet", action="store_true", help="no progress output")
    common.add_argument("--threads", type=int, default=None, help="BLAS threads (default: all cores)")

    p = argparse.ArgumentParser(prog="carleman-newton", description="Source reconstruction from lateral Cauchy data.")
    sub = p.add_subparsers(dest="command", required=True)
    fwd = sub.add_parser("forward", parents=[common], help="simulate and save boundary traces")
    fwd.add_argument("--csv", action="store_true", help="also write traces.csv")
    inv = sub.add_parser("invert", parents=[common], help="reconstruct from saved traces")
    inv.add_argument("--traces", help="trace file (.meta, .bin or stem)")
    sub.add_parser("full", parents=[common], help="forward, noise and inversion")
    diag = sub.add_parser("basis-diag", parents=[common], help="truncation error e_N on the top side")
    diag.add_argument("--traces", help="trace file (.meta, .bin or stem)")
    diag.add_argument("--N-list", dest="N_list", default="10,20,35")
    ver = sub.add_parser("verify", parents=[common], help="run the built-in oracle checks")
    ver.add_argument("--skip-forward", action="store_true", help="skip the heat-kernel forward check")
    return p


def _limit_threads(n):
    if n is None:
        return None
    if n < 1:
        raise ConfigError("--threads must be positive")
    from threadpoolctl import threadpool_limits

    return threadpool_limits(limits=n)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.ERROR if args.quiet else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        limiter = _limit_threads(args.threads)
        try:
            return COMMANDS[args.command](args)
        finally:
            if limiter is not None:
                limiter.unregister()
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NumericalError, BasisError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
