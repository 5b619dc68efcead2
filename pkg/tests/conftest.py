import os
import sys

import numpy as np
import pytest

sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from core_model import AnchorSet, HyperParams, RandomStream  # noqa: E402
from losses import LinearLoss  # noqa: E402


@pytest.fixture
def benchmark_anchors():
    """Four anchors in d=1 with mean 0.5."""
    return AnchorSet(np.array([0.2, 0.4, 0.6, 0.8]))


@pytest.fixture
def benchmark_hp():
    return HyperParams(2.0, 0.1)


@pytest.fixture
def linear_1d():
    return LinearLoss(1)


@pytest.fixture
def stream():
    return RandomStream(0)
