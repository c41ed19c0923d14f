import json
from pathlib import Path

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from darcs.config import from_dict

ROOT = Path(__file__).resolve().parents[1]
DESK = json.loads((ROOT / "configs" / "desk.json").read_text())

settings.register_profile("default", deadline=None, max_examples=100,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


def desk_config(**overrides):
    """Desk profile (configs/desk.json) with per-test overrides."""
    return from_dict({**DESK, **overrides})


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
