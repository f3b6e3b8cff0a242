import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from ffpr import simulator  # noqa: E402


@pytest.fixture
def rng():
    return np.random.default_rng(20240607)


@pytest.fixture(scope="session")
def crystals():
    return [simulator.sample_crystal(simulator.record_rng(314, i)) for i in range(40)]
