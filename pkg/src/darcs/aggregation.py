"""Reliability-weighted averaging for both aggregation tiers."""
from __future__ import annotations

from typing import NamedTuple, Sequence

import numpy as np

from .errors import InvalidInputError
from .numerics import check_same_dim


class WeightedUpdate(NamedTuple):
    update: np.ndarray
    weight: float


def clamp_weight(score: float) -> float:
    """A negative reliability score contributes nothing rather than anti-contributing."""
    return max(0.0, float(score))


def weighted_mean(items: Sequence[WeightedUpdate]) -> np.ndarray | None:
    """Sum(w_i u_i) / Sum(w_i) in list order; ``None`` when the weights sum to zero."""
    if len(items) == 0:
        raise InvalidInputError("nothing to aggregate")
    total = np.zeros_like(np.asarray(items[0].update, dtype=np.float64))
    wsum = 0.0
    for item in items:
        if item.weight < 0:
            raise InvalidInputError("negative aggregation weight")
        check_same_dim(total, item.update)
        if item.weight == 0:
            continue
        total += item.weight * item.update
        wsum += item.weight
    if wsum <= 0:
        return None
    return total / wsum


def ch_step(theta_prev: np.ndarray, G: np.ndarray, eta: float = 1.0) -> np.ndarray:
    check_same_dim(theta_prev, G)
    return theta_prev - eta * G
