"""Attack x epsilon x defense convergence table at desk scale.

Runs configs/table1_axes.json over the desk profile and prints a pivot with
one row per (attack, epsilon) and one column per defense, plus the no-attack
baseline per epsilon.

    python3 scripts/table1_matrix.py --out runs/table1 --jobs 4
"""
import argparse
import csv
import json
import sys
from collections import defaultdict

from _common import DESK, ROOT

from darcs.cli import run_matrix
from darcs.config import from_dict


def main(argv=None) -> int:
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--out", default="runs/table1")
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    args = p.parse_args(argv)

    axes = json.loads((ROOT / "configs" / "table1_axes.json").read_text())
    base = from_dict({**DESK, "seed": args.seed})
    rows = run_matrix(base, axes, args.out, args.jobs)
    baseline = run_matrix(base.with_overrides(defense="none"), {"attack": ["none"], "epsilon": axes["epsilon"]},
                          f"{args.out}/baseline", args.jobs)

    table = defaultdict(dict)
    for r in rows:
        table[(r["attack"], r["epsilon"])][r["defense"]] = r["convergence_round"]
    defenses = axes["defense"]
    w = csv.writer(sys.stdout, delimiter="\t", lineterminator="\n")
    w.writerow(["attack", "epsilon", *defenses])
    for r in baseline:
        w.writerow(["none (baseline)", r["epsilon"], *[r["convergence_round"]] * len(defenses)])
    for (attack, eps), cells in table.items():
        w.writerow([attack, eps, *(cells[d] for d in defenses)])
    return 0


if __name__ == "__main__":
    sys.exit(main())
