"""Print the 16 Bell-outcome branches of the teleported C-NOT for one input.

For each pair of outcomes on photons (1,3) and (2,5) shows the probability,
the Pauli frame applied to photons (4,6), and the corrected-output fidelity.

    python3 scripts/branch_table.py --input H+
    python3 scripts/branch_table.py --random --seed 3
"""
import argparse
import itertools
import sys

import numpy as np

from telecnot.protocol import DEFAULT_TABLE, derive_correction_table, teleport_cnot
from telecnot.qstate import BellKind, QubitState, ket_string, random_state


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--input", default="H+", help="product label over H V + - L R")
    parser.add_argument("--random", action="store_true", help="use a random two-qubit input instead")
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args(argv)

    inp = random_state(2, np.random.default_rng(args.seed)) if args.random else QubitState.from_label(args.input)
    print(f"input: {ket_string(inp)}")
    # a generic input pins each frame uniquely; special inputs like H+ admit several
    derived = derive_correction_table()
    print(f"{'BSM 1&3':<8} {'BSM 2&5':<8} {'prob':>8}  {'frame':<8} fidelity  derived")
    for k13, k25 in itertools.product(BellKind, repeat=2):
        run = teleport_cnot(inp, (k13, k25))
        frame = DEFAULT_TABLE[(k13, k25)]
        same = "yes" if derived[(k13, k25)] == frame else "NO"
        print(f"{str(k13):<8} {str(k25):<8} {run.branch_prob:8.5f}  {str(frame):<8} {run.fidelity:.12f}  {same}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
