import numpy as np
import pytest

from revlogit.synthesis import simulate_dataset, reference_scenario


@pytest.fixture(scope="session")
def small_panel():
    """A 3-wave panel of 36 individuals simulated from the reference scenario."""
    spec = reference_scenario(12, seed=11)
    data, truth = simulate_dataset(spec)
    return spec, data, truth


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
