import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from narrowbeam.array import UpaGeometry, VerticalPrior

settings.register_profile("default", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture
def small_geom():
    return UpaGeometry(8, 12, 4)


@pytest.fixture
def desk_geom():
    return UpaGeometry(16, 24, 6)


@pytest.fixture
def prior():
    return VerticalPrior()


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
