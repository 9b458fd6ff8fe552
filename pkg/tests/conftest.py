import numpy as np
import pytest

from rfoptics.pairing import LightConeQuadrature


@pytest.fixture(scope="session")
def quad():
    return LightConeQuadrature()


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
