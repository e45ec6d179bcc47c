import numpy as np
import pytest

from cstarmod import IntervalFiberModel, deficiency_data


@pytest.fixture(scope="session")
def model101():
    return IntervalFiberModel(101)


@pytest.fixture(scope="session")
def model201():
    return IntervalFiberModel(201)


@pytest.fixture(scope="session")
def model301():
    return IntervalFiberModel(301)


@pytest.fixture(scope="session")
def defdata201(model201):
    return deficiency_data(model201)


@pytest.fixture()
def rng():
    return np.random.default_rng(1234)
