"""Run acceptance criteria and print one line per check.

    python scripts/run_acceptance.py            # all twelve
    python scripts/run_acceptance.py 5 9 --fast
"""
import argparse
import sys

from qlab.acceptance import CHECKS, run_criterion


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("criteria", nargs="*", type=int, default=sorted(CHECKS))
    ap.add_argument("--fast", action="store_true", help="10x smaller Monte-Carlo, 2x wider bounds")
    args = ap.parse_args()
    ok = True
    for k in args.criteria:
        for row in run_criterion(k, fast=args.fast):
            print(row.line(), flush=True)
            ok &= row.passed
    return 0 if ok else 2


if __name__ == "__main__":
    sys.exit(main())
