import pytest

from bishoplab.beurling import bump
from bishoplab.calculus import OrbitWindow
from bishoplab.operator import BeurlingWeightFn
from bishoplab.orbit import Rotation
from bishoplab.weights import parse_weight


@pytest.fixture(scope="session")
def golden():
    return Rotation.of("golden")


@pytest.fixture(scope="session")
def w8():
    return BeurlingWeightFn(8.0)


@pytest.fixture(scope="session")
def phi(w8):
    return bump(0.25, 0.1, w8)


@pytest.fixture(scope="session")
def psi(w8):
    return bump(0.75, 0.1, w8)


@pytest.fixture(scope="session")
def window(golden, w8):
    # M = 4096 needs J = 2M + 8
    return OrbitWindow.build(parse_weight("e*x"), golden, w8, 0.05, G=256, J=8200, n_mask=1000)
