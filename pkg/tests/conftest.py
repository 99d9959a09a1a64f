import numpy as np
import pytest

from rnlab.grid import FrequencyGrid, random_field


@pytest.fixture
def small_grid():
    """d=2, n_max=4 grid with the default window; cheap enough for loops."""
    return FrequencyGrid.for_box(2, 4, tau_step=0.25)


@pytest.fixture
def line_grid():
    """d=1 grid used by solver-scale tests."""
    return FrequencyGrid.for_box(1, 8, tau_step=0.25)


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)


@pytest.fixture
def sample_field(small_grid, rng):
    return random_field(small_grid, rng, envelope_power=-1.0)
