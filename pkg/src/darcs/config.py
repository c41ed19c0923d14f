"""Run configuration: defaults, validation and JSON round-tripping."""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path

from .adversary import ATTACK_KINDS
from .errors import ConfigError

FIRST_ROUND_RULES = ("skip", "seed", "cohort_mean", "cohort_min")
DEFENSES = ("none", "cosine_only", "zscore_only", "zscore_plus_cosine", "darcs")


@dataclass(frozen=True)
class RunConfig:
    # fleet and topology
    num_vehicles: int = 25
    tx_range_m: float = 100.0
    hop_limit: int = 1
    round_seconds: float = 1.0
    loss_prob: float = 0.0
    # attack
    attack: str = "none"
    noise_mean: float = 2.0
    noise_var: float = 0.3
    attacker_fraction: float = 0.2
    attack_onset_round: int = 1
    # defense
    defense: str = "darcs"
    select_fraction: float = 0.75
    unblock_time: int = 5
    z_threshold: float = 3.0
    cosine_adaptive_init: float = 0.90
    high_threshold_up: float = 0.95
    high_threshold_down: float = 0.2
    delta: float = 0.05
    cross_threshold: float = 0.9
    accuracy_weight: float = 1.0
    frequency_weight: float = 1.0
    anomaly_weight: float = 1.0
    eta_agg: float = 1.0
    # darcs switches (ablations and ambiguity resolutions)
    adaptive_threshold: bool = True
    cross_cluster_check: bool = True
    reset_counts_as_anomaly: bool = False
    cosine_raw_reject: bool = False
    cosine_reject_below: float = 0.0
    cosine_first_round: str = "skip"
    cosine_seed_value: float = 0.0
    cosine_breach_blocks: bool = False
    cosine_min_cohort: int = 1
    zscore_scope: str = "cluster"
    ch_temporal_reference: str = "literal"
    # convergence
    epsilon: float = 0.01
    max_rounds: int = 150
    stop_at_convergence: bool = True
    # data and model
    dataset_source: str = "synthetic"
    num_samples: int = 1000
    input_dim: int = 20
    num_classes: int = 4
    idx_images: str = ""
    idx_labels: str = ""
    classes_per_vehicle: int = 2
    hidden_dim: int = 0
    learning_rate: float = 0.1
    local_epochs: int = 1
    batch_size: int = 32
    seed: int = 0

    def __post_init__(self):
        validate(self)

    def to_dict(self) -> dict:
        return asdict(self)

    def with_overrides(self, **kw) -> "RunConfig":
        return from_dict({**self.to_dict(), **kw})


_FIELD_TYPES = {f.name: f.type for f in fields(RunConfig)}


def _require(cond: bool, key: str, bound: str) -> None:
    if not cond:
        raise ConfigError(f"{key} must be {bound}")


def validate(c: RunConfig) -> None:
    _require(c.num_vehicles >= 1, "num_vehicles", ">= 1")
    _require(c.tx_range_m > 0, "tx_range_m", "> 0")
    _require(c.hop_limit >= 1, "hop_limit", ">= 1")
    _require(c.round_seconds > 0, "round_seconds", "> 0")
    _require(0 <= c.loss_prob < 1, "loss_prob", "in [0, 1)")
    _require(c.attack in ATTACK_KINDS, "attack", f"one of {ATTACK_KINDS}")
    _require(c.noise_var >= 0, "noise_var", ">= 0")
    _require(0 <= c.attacker_fraction < 1, "attacker_fraction", "in [0, 1)")
    _require(c.attack_onset_round >= 1, "attack_onset_round", ">= 1")
    _require(c.defense in DEFENSES, "defense", f"one of {DEFENSES}")
    _require(0 < c.select_fraction <= 1, "select_fraction", "in (0, 1]")
    _require(c.unblock_time >= 0, "unblock_time", ">= 0")
    _require(c.z_threshold > 0, "z_threshold", "> 0")
    _require(0 < c.cosine_adaptive_init <= 2, "cosine_adaptive_init", "in (0, 2]")
    _require(0 <= c.high_threshold_up <= 1, "high_threshold_up", "in [0, 1]")
    _require(0 <= c.high_threshold_down <= c.cosine_adaptive_init, "high_threshold_down",
             "in [0, cosine_adaptive_init]")
    _require(c.delta > 0, "delta", "> 0")
    _require(-1 <= c.cross_threshold <= 1, "cross_threshold", "in [-1, 1]")
    for key in ("accuracy_weight", "frequency_weight", "anomaly_weight"):
        _require(getattr(c, key) >= 0, key, ">= 0")
    _require(c.accuracy_weight + c.frequency_weight + c.anomaly_weight > 0,
             "reliability weights", "not all zero")
    _require(c.eta_agg > 0, "eta_agg", "> 0")
    _require(-1 <= c.cosine_reject_below <= 1, "cosine_reject_below", "in [-1, 1]")
    _require(c.cosine_first_round in FIRST_ROUND_RULES, "cosine_first_round", f"one of {FIRST_ROUND_RULES}")
    _require(-1 <= c.cosine_seed_value <= 1, "cosine_seed_value", "in [-1, 1]")
    _require(c.cosine_min_cohort >= 1, "cosine_min_cohort", ">= 1")
    _require(c.ch_temporal_reference in ("literal", "previous_update"), "ch_temporal_reference",
             "'literal' or 'previous_update'")
    _require(c.zscore_scope in ("cluster", "network"), "zscore_scope", "'cluster' or 'network'")
    _require(c.epsilon > 0, "epsilon", "> 0")
    _require(c.max_rounds >= 1, "max_rounds", ">= 1")
    _require(c.dataset_source in ("synthetic", "idx"), "dataset_source", "'synthetic' or 'idx'")
    if c.dataset_source == "idx":
        _require(bool(c.idx_images) and bool(c.idx_labels), "idx_images/idx_labels",
                 "set when dataset_source is 'idx'")
    _require(c.num_samples >= c.num_classes, "num_samples", ">= num_classes")
    _require(c.input_dim >= 1, "input_dim", ">= 1")
    _require(c.num_classes >= 2, "num_classes", ">= 2")
    _require(c.classes_per_vehicle >= 1, "classes_per_vehicle", ">= 1")
    if c.dataset_source == "synthetic":
        _require(c.num_vehicles * c.classes_per_vehicle >= c.num_classes,
                 "num_vehicles * classes_per_vehicle", ">= num_classes")
    _require(c.hidden_dim >= 0, "hidden_dim", ">= 0")
    _require(c.learning_rate > 0, "learning_rate", "> 0")
    _require(c.local_epochs >= 1, "local_epochs", ">= 1")
    _require(c.batch_size >= 1, "batch_size", ">= 1")


def _coerce(key: str, value):
    kind = _FIELD_TYPES[key]
    try:
        if kind == "bool":
            if isinstance(value, str):
                if value.lower() in ("1", "true", "yes", "on"):
                    return True
                if value.lower() in ("0", "false", "no", "off"):
                    return False
                raise ValueError(value)
            if not isinstance(value, bool):
                raise ValueError(value)
            return value
        if kind == "int":
            if isinstance(value, bool) or (isinstance(value, float) and not value.is_integer()):
                raise ValueError(value)
            return int(value)
        if kind == "float":
            if isinstance(value, bool):
                raise ValueError(value)
            return float(value)
        return str(value)
    except (TypeError, ValueError):
        raise ConfigError(f"{key} expects {kind}, got {value!r}") from None


def from_dict(data: dict) -> RunConfig:
    if not isinstance(data, dict):
        raise ConfigError("config must be a JSON object")
    unknown = sorted(set(data) - set(_FIELD_TYPES))
    if unknown:
        raise ConfigError(f"unknown config key(s): {', '.join(unknown)}")
    return RunConfig(**{k: _coerce(k, v) for k, v in data.items()})


def load_config(path=None, overrides: dict | None = None) -> RunConfig:
    """Read a JSON config file (optional) and apply ``overrides`` on top."""
    data = {}
    if path is not None:
        text = Path(path).read_text()  # OSError propagates to the caller
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON ({exc})") from None
        if not isinstance(data, dict):
            raise ConfigError("config must be a JSON object")
    return from_dict({**data, **(overrides or {})})


def parse_override(item: str) -> tuple[str, str]:
    """``key=value`` from the command line; JSON-decoded when possible."""
    if "=" not in item:
        raise ConfigError(f"override {item!r} is not key=value")
    key, raw = item.split("=", 1)
    key = key.strip().replace("-", "_")
    if key not in _FIELD_TYPES:
        raise ConfigError(f"unknown config key(s): {key}")
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    return key, value


__all__ = ["RunConfig", "DEFENSES", "from_dict", "load_config", "parse_override", "validate", "replace"]
