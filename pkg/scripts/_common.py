"""Shared helpers for the experiment scripts."""
import json
import math
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent
DESK = json.loads((ROOT / "configs" / "desk.json").read_text())


def rounds(summary: dict) -> float:
    c = summary["convergence_round"]
    return math.inf if c == "inf" else c


def block_latency(summary: dict) -> float:
    firsts = summary["attacker_first_block_round"].values()
    return max((math.inf if r is None else r) for r in firsts) if firsts else 0
