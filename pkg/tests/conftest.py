import numpy as np
import pytest

from s3minimal.isogroup import generate
from s3minimal.plateau import StandardPrism, solve_plateau
from s3minimal.tessellation import build_configuration

PI = np.pi


@pytest.fixture(scope="session")
def cfg4():
    return build_configuration(4)


@pytest.fixture(scope="session")
def G4(cfg4):
    return generate(cfg4.generators())


@pytest.fixture(scope="session")
def cfg12():
    return build_configuration(12)


@pytest.fixture(scope="session")
def G12(cfg12):
    return generate(cfg12.generators())


@pytest.fixture(scope="session")
def prism_m0():
    return StandardPrism(PI / 8, PI / 2, PI / 4)


@pytest.fixture(scope="session")
def prism_cs():
    return StandardPrism(PI / 4, PI / 2, PI / 4)


_discs = {}


def solved_disc(prism, level):
    key = (prism.S, prism.Theta, prism.Z, level)
    if key not in _discs:
        _discs[key] = solve_plateau(prism, level)
    return _discs[key]


@pytest.fixture(scope="session")
def disc3(prism_m0):
    return solved_disc(prism_m0, 3)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
