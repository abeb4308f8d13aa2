import math

import numpy as np
import pytest

from stadium_decay.damping import build_wing_damping
from stadium_decay.geometry import build_rectangle, build_stadium


@pytest.fixture
def rect_mesh():
    """Unit-by-pi rectangle, 10 x 32 cells."""
    return build_rectangle(1.0, math.pi, 0.1)


@pytest.fixture
def small_rect():
    return build_rectangle(1.0, 1.0, 0.125)


@pytest.fixture
def stadium_mesh():
    return build_stadium(math.pi / 2, 0.1)


@pytest.fixture
def coarse_stadium():
    """Stadium with a few hundred interior nodes, small enough for dense linear algebra."""
    return build_stadium(math.pi / 2, 0.2)


@pytest.fixture
def wing_damping(stadium_mesh):
    return build_wing_damping(stadium_mesh, (0.15, 0.85), 1.0)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
