"""Parameter sweeps at reduced scale: Carleman lambda, noise level, or N.

Each row is one full run; columns are the swept value, peak, peak error,
global L2 error and iteration count.
"""
import argparse

from carleman_newton.cli import resolve_config
from carleman_newton.experiment import load_config, replace_config
from carleman_newton.pipeline import run_full

KEYS = {"lambda": "carleman__lam", "delta": "noise__delta", "N": "basis__N"}


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("param", choices=sorted(KEYS))
    ap.add_argument("values", help="comma-separated values")
    ap.add_argument("--test", type=int, choices=(1, 2), default=1)
    ap.add_argument("--n1", type=int, default=120)
    ap.add_argument("--N", type=int, default=20)
    args = ap.parse_args(argv)

    base = replace_config(load_config(resolve_config(f"paper_test{args.test}.cfg")), grid__n1=args.n1, basis__N=args.N)
    cast = int if args.param == "N" else float
    print(f"{args.param:>8} {'peak':>8} {'peak_err':>9} {'l2_err':>8} {'iters':>5}")
    for raw in args.values.split(","):
        v = cast(raw)
        _, b = run_full(replace_config(base, **{KEYS[args.param]: v}))
        m = b.metrics
        print(f"{v:>8g} {m['peak_comp']:8.3f} {m['peak_rel_err']:9.3f} {m['l2_rel_err']:8.3f} {m['iterations']:5d}")


if __name__ == "__main__":
    main()
