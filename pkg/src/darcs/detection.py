"""Norm z-scores, cosine tests and the adaptive cosine-drift threshold."""
from __future__ import annotations

from dataclasses import dataclass, replace
from typing import NamedTuple, Sequence

import numpy as np

from .errors import InvalidInputError
from .numerics import check_same_dim

DEGENERATE_EPS = 1e-12


class NormStats(NamedTuple):
    mean: float
    std: float
    n: int


def norm_stats(norms: Sequence[float]) -> NormStats:
    arr = np.asarray(norms, dtype=np.float64)
    if arr.size == 0:
        raise InvalidInputError("empty cohort")
    mean = float(arr.mean())
    # population std: the cohort is every participant of the round
    std = float(np.sqrt(np.mean((arr - mean) ** 2)))
    return NormStats(mean, std, int(arr.size))


def zscores(norms: Sequence[float]) -> np.ndarray:
    """Z-score of every norm in the cohort; all zeros when the cohort is flat."""
    stats = norm_stats(norms)
    arr = np.asarray(norms, dtype=np.float64)
    if stats.std < DEGENERATE_EPS:
        return np.zeros_like(arr)
    return (arr - stats.mean) / stats.std


def zscore(norms: Sequence[float], k: int) -> float:
    if not 0 <= k < len(norms):
        raise InvalidInputError(f"index {k} outside cohort of {len(norms)}")
    return float(zscores(norms)[k])


def is_outlier(z: float, threshold: float) -> bool:
    return abs(z) >= threshold


def max_attainable_zscore(n: int) -> float:
    """Largest |z| any member of an n-strong cohort can reach (population std)."""
    return float(np.sqrt(max(n - 1, 0)))


def ch_norm(theta_ch: np.ndarray, theta_global: np.ndarray) -> float:
    check_same_dim(theta_ch, theta_global)
    return float(np.linalg.norm(theta_ch - theta_global))


class Cosine(NamedTuple):
    value: float
    degenerate: bool


def cosine(a: np.ndarray, b: np.ndarray) -> Cosine:
    """Cosine similarity; ``(0.0, True)`` when either vector is (near) zero."""
    check_same_dim(a, b)
    na = float(np.linalg.norm(a))
    nb = float(np.linalg.norm(b))
    if na < DEGENERATE_EPS or nb < DEGENERATE_EPS:
        return Cosine(0.0, True)
    value = float(np.dot(a, b)) / (na * nb)
    return Cosine(min(1.0, max(-1.0, value)), False)


def mean_gradient(updates: Sequence[np.ndarray]) -> np.ndarray | None:
    """Component-wise mean, summed in list order.  ``None`` for an empty cohort."""
    if len(updates) == 0:
        return None
    total = np.zeros_like(np.asarray(updates[0], dtype=np.float64))
    for u in updates:
        check_same_dim(total, u)
        total += u
    return total / len(updates)


def pairwise_cosines(deltas: Sequence[np.ndarray]) -> np.ndarray:
    """Matrix of cosines between every pair of cluster deltas (diagonal = 1)."""
    c = len(deltas)
    sims = np.eye(c)
    for p in range(c):
        for q in range(p + 1, c):
            sims[p, q] = sims[q, p] = cosine(deltas[p], deltas[q]).value
    return sims


def avg_cross_cluster(sims: np.ndarray, p: int) -> float | None:
    """Mean of row ``p`` of a cosine matrix, excluding the diagonal.

    ``None`` when there is only one cluster (the check does not apply).
    """
    sims = np.asarray(sims, dtype=np.float64)
    c = sims.shape[0]
    if c < 2:
        return None
    total = 0.0
    for q in range(c):
        if q != p:
            total += sims[p, q]
    return total / (c - 1)


@dataclass(frozen=True)
class AdaptiveThreshold:
    """Allowed round-to-round cosine drift for one vehicle; only ever tightens."""
    value: float = 0.90
    floor: float = 0.2
    step: float = 0.05
    trigger: float = 0.95

    def breached(self, previous_cos: float, current_cos: float) -> bool:
        return abs(previous_cos - current_cos) > self.value


def tighten(threshold: AdaptiveThreshold, historical_accuracy: float) -> AdaptiveThreshold:
    if historical_accuracy >= threshold.trigger and threshold.value > threshold.floor:
        return replace(threshold, value=max(threshold.floor, threshold.value - threshold.step))
    return threshold
