"""Run every catalog case through the ``example`` command and collect the results.

    python scripts/reproduce_examples.py --spacing 0.001 --out runs/
"""

import argparse
import os

from hjsc import catalog
from hjsc.cli import main as cli


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--spacing", type=float, default=1e-3)
    ap.add_argument("--competitors", type=int, default=50)
    ap.add_argument("--out", default=None, help="write each case's field under this directory")
    args = ap.parse_args()
    codes = {}
    for case in catalog():
        argv = ["example", case.id, "--spacing", str(args.spacing), "--competitors", str(args.competitors)]
        if args.out:
            argv += ["--out", os.path.join(args.out, case.id)]
        codes[case.id] = cli(argv)
        print()
    print("exit codes: " + ", ".join(f"{k}={v}" for k, v in codes.items()))


if __name__ == "__main__":
    main()
