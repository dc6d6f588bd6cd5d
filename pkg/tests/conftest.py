import numpy as np
import pytest

from contactpd import collision

collision.DEBUG_CHECKS = True


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(20240817)
