"""Noise sweep over pair parameter g, visibility v and input-preparation error.

Writes sweep.csv / sweep.json to --out and prints which grid points land near
the measured truth-table fidelity (0.72 +- 0.05) and entangling fidelity
(0.575 +- 0.027).

    python3 scripts/run_sweep.py --out results/sweep
    python3 scripts/run_sweep.py --g 0 0.1 0.2 0.3 0.4 --v 1 0.9 0.8 --e 0
"""
import argparse
import csv
import sys
import time

from telecnot import cli
from telecnot.tomography import REFERENCE_FIDELITY, REFERENCE_TRUTH_TABLE_FIDELITY

TRUTH_BAND = 0.05
ENTANGLE_BAND = 0.027


def _point(row):
    return f"g={float(row['g']):g} v={float(row['v']):g} e={float(row['input_error']):g}"


def main(argv=None):
    default = cli.RunConfig().grid
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--g", type=float, nargs="+", default=default["g"])
    parser.add_argument("--v", type=float, nargs="+", default=default["v"])
    parser.add_argument("--e", type=float, nargs="+", default=default["input_error"])
    parser.add_argument("--truncation", type=int, default=8)
    parser.add_argument("--out", default=None)
    args = parser.parse_args(argv)

    cfg = cli.RunConfig(
        experiment="sweep", out=args.out, truncation=args.truncation,
        grid={"g": args.g, "v": args.v, "input_error": args.e},
    )
    cfg.validate()
    start = time.perf_counter()
    code = cli.cmd_sweep(cfg)
    print(f"\n{len(args.g) * len(args.v) * len(args.e)} points in {time.perf_counter() - start:.1f} s")
    if args.out is None:
        return code

    rows = list(csv.DictReader(open(f"{args.out}/sweep.csv")))
    near_truth = [r for r in rows if r["F_truth"] and abs(float(r["F_truth"]) - REFERENCE_TRUTH_TABLE_FIDELITY) <= TRUTH_BAND]
    near_ent = [r for r in rows if r["F_entangle"] and abs(float(r["F_entangle"]) - REFERENCE_FIDELITY) <= ENTANGLE_BAND]
    print(f"points within {TRUTH_BAND} of truth-table fidelity {REFERENCE_TRUTH_TABLE_FIDELITY}:")
    for r in near_truth:
        print(f"  {_point(r)}  F_truth={float(r['F_truth']):.4f}")
    print(f"points within {ENTANGLE_BAND} of entangling fidelity {REFERENCE_FIDELITY}:")
    for r in near_ent:
        print(f"  {_point(r)}  F_entangle={float(r['F_entangle']):.4f}")
    both = [r for r in near_truth if r in near_ent]
    print("points matching both: " + (", ".join(_point(r) for r in both) or "none"))
    return code


if __name__ == "__main__":
    sys.exit(main())
