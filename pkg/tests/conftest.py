import numpy as np
import pytest

from src.cli.utils.helpers import band_limits, random_band_limited
from src.modelling.grids import PeriodicCenterGrid
from src.modelling.group_core import build_group
from src.modelling.laguerre_spherical import make_layout


@pytest.fixture(scope="session")
def heisenberg():
    return build_group(1, 1)


@pytest.fixture(scope="session")
def group22():
    return build_group(2, 2)


@pytest.fixture(scope="session")
def layout11(heisenberg):
    """H^1_1 with a 16-point periodic centre and data up to |k| = 3."""
    center = PeriodicCenterGrid(1, 2 * np.pi, 16)
    return make_layout(heisenberg, 4, center, *band_limits(center, 3))


@pytest.fixture(scope="session")
def layout22(group22):
    """H^2_2 with an 8 x 8 periodic centre covering the whole lattice."""
    return make_layout(group22, 2, PeriodicCenterGrid(2, 2 * np.pi, 8))


@pytest.fixture
def rng():
    return np.random.default_rng(7)


@pytest.fixture
def spectrum11(layout11, rng):
    return random_band_limited(layout11, rng, 3)


@pytest.fixture
def spectrum22(layout22, rng):
    return random_band_limited(layout22, rng, 2, norm=0.05)
