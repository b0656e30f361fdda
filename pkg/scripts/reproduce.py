"""Reproduce Test 1 (single disk, Fisher) or Test 2 (four disks, gradient term).

Writes traces, reconstruction, history and metrics to --out and prints the
metrics.  --reduced swaps in n1=120, N=20 for a run of a few minutes.
"""
import argparse
import sys
import time

from carleman_newton.cli import resolve_config
from carleman_newton.experiment import load_config, replace_config, save_results, save_traces
from carleman_newton.pipeline import run_full


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--test", type=int, choices=(1, 2), default=1)
    ap.add_argument("--reduced", action="store_true", help="n1=120, N=20 instead of n1=240, N=35")
    ap.add_argument("--delta", type=float, default=None, help="override the noise level")
    ap.add_argument("--seed", type=int, default=None)
    ap.add_argument("--out", default=None)
    args = ap.parse_args(argv)

    cfg = load_config(resolve_config(f"paper_test{args.test}.cfg"))
    over = {}
    if args.reduced:
        over.update(grid__n1=120, basis__N=20)
    if args.delta is not None:
        over["noise__delta"] = args.delta
    if args.seed is not None:
        over["noise__seed"] = args.seed
    cfg = replace_config(cfg, **over)

    def progress(it, hist):
        print(f"iteration {it}: inc_inf={hist.inc_inf[-1]:.4e}", file=sys.stderr, flush=True)

    t0 = time.perf_counter()
    traces, bundle = run_full(cfg, progress=progress)
    out = args.out or f"out/test{args.test}{'_reduced' if args.reduced else ''}"
    save_traces(traces, f"{out}/traces")
    save_results(bundle, out)
    for k, v in bundle.metrics.items():
        print(f"{k} = {v}")
    print(f"wall seconds = {time.perf_counter() - t0:.1f}")


if __name__ == "__main__":
    main()
