import numpy as np
import pytest

from parcd.problems import make_ridge


@pytest.fixture(scope="session")
def ridge16():
    return make_ridge(16, seed=0, curvature=1.0)


@pytest.fixture(scope="session")
def ridge64():
    return make_ridge(64, seed=0, curvature=1.0)


@pytest.fixture()
def rng():
    return np.random.default_rng(0)
