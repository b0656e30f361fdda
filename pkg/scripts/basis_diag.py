"""Truncation error e_N on the top side for Test-2 forward data.

Prints max and L2 of e_N for each N, plus the max after an initial
boundary-layer window, and optionally writes the per-N CSVs.
"""
import argparse

import numpy as np

from carleman_newton.cli import resolve_config
from carleman_newton.experiment import atomic_write, load_config, replace_config
from carleman_newton.pipeline import basis_diagnostic, diagnostic_csv, simulate


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--N-list", default="5,10,15,20,25,30,35,40")
    ap.add_argument("--n1", type=int, default=240)
    ap.add_argument("--skip", type=float, default=0.005, help="window [0, skip) excluded from the second max")
    ap.add_argument("--out", default=None, help="directory for e_N CSVs")
    args = ap.parse_args(argv)

    cfg = replace_config(load_config(resolve_config("paper_test2.cfg")), grid__n1=args.n1)
    traces = simulate(cfg)
    N_list = [int(v) for v in args.N_list.split(",")]
    print(f"{'N':>4} {'max':>10} {'max t>=skip':>12} {'L2':>10}")
    for d in basis_diagnostic(traces, N_list):
        late = d.error[:, d.times >= args.skip].max()
        print(f"{d.N:>4} {d.max:10.3e} {late:12.3e} {d.l2:10.3e}")
        if args.out:
            atomic_write(f"{args.out}/e_N{d.N}.csv", diagnostic_csv(d))
    k, j = np.unravel_index(d.error.argmax(), d.error.shape)
    print(f"largest error for N={d.N} at x={d.x[k]:.3f}, t={d.times[j]:.4f}")


if __name__ == "__main__":
    main()
