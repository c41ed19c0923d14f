"""Anomaly detection and reliability-based client selection for cluster-based
hierarchical federated learning, with a deterministic vehicular simulator."""
from .config import RunConfig, from_dict, load_config
from .engine import Simulation, run_experiment
from .errors import (ConfigError, ContractViolation, DarcsError, IdxFormatError,
                     InvalidInputError)

__version__ = "0.1.0"

__all__ = [
    "RunConfig", "from_dict", "load_config", "Simulation", "run_experiment",
    "DarcsError", "ConfigError", "ContractViolation", "IdxFormatError", "InvalidInputError",
]
