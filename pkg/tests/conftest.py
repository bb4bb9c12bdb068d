import numpy as np
import pytest

from ewa.estimators import make_collection
from ewa.harness import SignalSpec
from ewa.noise import NoiseModel


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture(scope="session")
def nested64():
    """Nested cosine projections of ranks 1, 2, 4, ..., 64 with a uniform prior."""
    return make_collection(64, "cosine", "projection", [1, 2, 4, 8, 16, 32, 64])


@pytest.fixture(scope="session")
def sinusoid64():
    return SignalSpec("sinusoid", 64, amplitude=3.0, frequencies=(2.0,))


@pytest.fixture(scope="session")
def gaussian1():
    return NoiseModel("gaussian", 1.0)
