"""Convergence round of darcs at hop limits 1 and 3 under combined attack.

    python3 scripts/hop_depth.py --seeds 0 1 2 3 4
"""
import argparse
import statistics
import sys

from _common import DESK, rounds

from darcs.config import from_dict
from darcs.engine import run_experiment


def main(argv=None) -> int:
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--seeds", type=int, nargs="+", default=[0, 1, 2, 3, 4])
    p.add_argument("--hops", type=int, nargs="+", default=[1, 3])
    args = p.parse_args(argv)

    per_hop = {}
    for hop in args.hops:
        per_hop[hop] = [rounds(run_experiment(from_dict({**DESK, "seed": s, "attack": "combined",
                                                          "hop_limit": hop}))[1]) for s in args.seeds]
        print(f"hop {hop}: rounds {per_hop[hop]} median {statistics.median(per_hop[hop])}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
