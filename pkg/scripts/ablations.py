"""Ablate adaptive thresholding and the cross-cluster check under combined attack.

    python3 scripts/ablations.py --seeds 0 1 2 3 4
"""
import argparse
import sys

from _common import DESK, block_latency

from darcs.config import from_dict
from darcs.engine import run_experiment

VARIANTS = {
    "full": {},
    "no_adaptive": {"adaptive_threshold": False},
    "no_cross_cluster": {"cross_cluster_check": False},
    "neither": {"adaptive_threshold": False, "cross_cluster_check": False},
}


def main(argv=None) -> int:
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--seeds", type=int, nargs="+", default=[0])
    p.add_argument("--attack", default="combined")
    args = p.parse_args(argv)

    print("seed\tvariant\tfinal_accuracy\tconvergence_round\tblock_latency\tbenign_false_block_rate")
    for seed in args.seeds:
        for name, switches in VARIANTS.items():
            _, s = run_experiment(from_dict({**DESK, "seed": seed, "attack": args.attack, **switches}))
            print(f"{seed}\t{name}\t{s['final_accuracy']:.2f}\t{s['convergence_round']}\t"
                  f"{block_latency(s)}\t{s['benign_false_block_rate']:.3f}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
