import cmath
import math

import numpy as np
import pytest
from hypothesis import settings

from holoqm.surface_group import octagon_rep

settings.register_profile("default", max_examples=60, deadline=None)
settings.load_profile("default")


@pytest.fixture(scope="session")
def rep():
    return octagon_rep()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def disk_point(rng, max_radius=3.0):
    """Uniform direction, hyperbolic radius uniform in [0, max_radius]."""
    r = math.tanh(0.5 * rng.uniform(0.0, max_radius))
    return r * cmath.exp(1j * rng.uniform(0.0, 2.0 * math.pi))
