"""Model-poisoning transforms applied to an attacker's outgoing update."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError

ATTACK_KINDS = ("none", "gaussian", "gradient_ascent", "combined")


@dataclass(frozen=True)
class AttackProfile:
    kind: str = "none"
    noise_mean: float = 2.0
    noise_var: float = 0.3
    attacker_fraction: float = 0.2
    seed: int = 0
    onset_round: int = 1

    def __post_init__(self):
        if self.kind not in ATTACK_KINDS:
            raise InvalidInputError(f"unknown attack kind {self.kind!r}")
        if self.noise_var < 0:
            raise InvalidInputError("noise_var must be >= 0")
        if not 0 <= self.attacker_fraction < 1:
            raise InvalidInputError("attacker_fraction must be in [0, 1)")
        if self.onset_round < 1:
            raise InvalidInputError("onset_round must be >= 1")


def choose_attackers(num_vehicles: int, fraction: float, seed: int) -> frozenset[int]:
    """``round(fraction * num_vehicles)`` distinct vehicle ids, fixed by ``seed``."""
    count = int(round(fraction * num_vehicles))
    if count == 0:
        return frozenset()
    rng = np.random.default_rng([seed, 0xA77AC])
    return frozenset(int(v) for v in rng.choice(num_vehicles, size=count, replace=False))


def box_muller(rng: np.random.Generator, size: int) -> np.ndarray:
    """Standard normals from uniform pairs (cosine branch only)."""
    u1 = 1.0 - rng.random(size)  # (0, 1]
    u2 = rng.random(size)
    return np.sqrt(-2.0 * np.log(u1)) * np.cos(2.0 * np.pi * u2)


def apply_gaussian(update: np.ndarray, mean: float, var: float,
                   rng: np.random.Generator) -> np.ndarray:
    if var < 0:
        raise InvalidInputError("variance must be >= 0")
    if var == 0:
        return update + mean
    return update + mean + np.sqrt(var) * box_muller(rng, update.size)


def apply_gradient_ascent(update: np.ndarray) -> np.ndarray:
    # a descent delta -eta*grad becomes +eta*grad
    return -update


def apply_profile(update: np.ndarray, profile: AttackProfile, vehicle_is_attacker: bool,
                  rng: np.random.Generator, round_index: int = 1) -> np.ndarray:
    if not vehicle_is_attacker or profile.kind == "none" or round_index < profile.onset_round:
        return update
    if profile.kind == "gaussian":
        return apply_gaussian(update, profile.noise_mean, profile.noise_var, rng)
    if profile.kind == "gradient_ascent":
        return apply_gradient_ascent(update)
    return apply_gaussian(apply_gradient_ascent(update), profile.noise_mean, profile.noise_var, rng)
