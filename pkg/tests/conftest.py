import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def unit_columns(rng, m, k):
    D = rng.standard_normal((m, k))
    return D / np.linalg.norm(D, axis=0)
