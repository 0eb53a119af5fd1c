import os
import sys

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

sys.path.insert(0, os.path.dirname(__file__))

settings.register_profile("default", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

from fadingmac import FadingLaw  # noqa: E402


@pytest.fixture
def rayleigh():
    return FadingLaw.rayleigh(1.0)


@pytest.fixture
def two_state():
    return FadingLaw.discrete([(1.0, 0.5), (4.0, 0.5)])


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
