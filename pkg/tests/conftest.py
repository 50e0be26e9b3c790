import sys
from pathlib import Path

import pytest
from dataclasses import replace

import numpy as np

sys.path.insert(0, str(Path(__file__).parent))

from beamsim.scenario import ScenarioConfig


@pytest.fixture(scope="session")
def micro_cfg():
    """12 UEs, full layout otherwise; fast enough for per-test drops."""
    return replace(ScenarioConfig(), ue_per_sector=1.0)


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(1234)
