"""Per-vehicle reliability bookkeeping, block lifecycle and client selection."""
from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Iterable

from .errors import InvalidInputError


@dataclass
class ReliabilityMetrics:
    total_accuracy: float = 0.0
    total_contributions: int = 0
    total_anomalies: int = 0
    rounds_elapsed: int = 0

    def record_contribution(self, accuracy: float) -> None:
        self.total_contributions += 1
        self.total_accuracy += accuracy

    def record_anomaly(self) -> None:
        self.total_anomalies += 1


@dataclass(frozen=True)
class ReliabilityWeights:
    accuracy_weight: float = 1.0
    frequency_weight: float = 1.0
    anomaly_weight: float = 1.0

    def __post_init__(self):
        ws = (self.accuracy_weight, self.frequency_weight, self.anomaly_weight)
        if any(w < 0 for w in ws):
            raise InvalidInputError("reliability weights must be non-negative")
        if not any(w > 0 for w in ws):
            raise InvalidInputError("reliability weights must not all be zero")


def historical_accuracy(m: ReliabilityMetrics) -> float:
    # denominator is every elapsed round, so missed rounds dilute the average
    if m.rounds_elapsed == 0:
        return 0.0
    return m.total_accuracy / m.rounds_elapsed


def contribution_frequency(m: ReliabilityMetrics) -> float:
    if m.rounds_elapsed == 0:
        return 0.0
    return m.total_contributions / m.rounds_elapsed


def anomaly_record(m: ReliabilityMetrics) -> float:
    if m.rounds_elapsed == 0:
        return 0.0
    return m.total_anomalies / m.rounds_elapsed


def reliability_score(m: ReliabilityMetrics, w: ReliabilityWeights = ReliabilityWeights()) -> float:
    return (w.accuracy_weight * historical_accuracy(m)
            + w.frequency_weight * contribution_frequency(m)
            - w.anomaly_weight * anomaly_record(m))


@dataclass(frozen=True)
class BlockState:
    flag: bool = False
    duration: int = 0
    unblock_time: int = 5

    def blocked(self) -> "BlockState":
        return replace(self, flag=True, duration=0)


def tick_block(b: BlockState) -> tuple[BlockState, bool]:
    """Advance one round of a block; returns the new state and round eligibility."""
    if b.flag and b.duration < b.unblock_time:
        return replace(b, duration=b.duration + 1), False
    return replace(b, flag=False), True


def select_clients(records: Iterable[tuple[int, float, bool]], fraction: float) -> list[int]:
    """Top ``ceil(fraction * eligible)`` vehicle ids by score; ties go to the lower id."""
    if not 0 < fraction <= 1:
        raise InvalidInputError("fraction must be in (0, 1]")
    eligible = [(vid, score) for vid, score, ok in records if ok]
    eligible.sort(key=lambda r: (-r[1], r[0]))
    # the epsilon guards products such as 0.75 * 8 landing a hair above an integer
    k = math.ceil(fraction * len(eligible) - 1e-9)
    return [vid for vid, _ in eligible[:k]]
