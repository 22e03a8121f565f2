import numpy as np
import pytest

from towerlab.fields import TowerConfig, build_tower
from towerlab.greens import DomainSpec, GreensProvider


@pytest.fixture(scope="session")
def bubble_n3():
    return build_tower(TowerConfig(3, 0))


@pytest.fixture(scope="session")
def tower_n3_k8():
    return build_tower(TowerConfig(3, 8))


@pytest.fixture(scope="session")
def tower_n3_k16():
    return build_tower(TowerConfig(3, 16))


@pytest.fixture(scope="session")
def tower_n4_k8():
    return build_tower(TowerConfig(4, 8))


@pytest.fixture(scope="session")
def ball_provider():
    return GreensProvider(DomainSpec("ball", 3))


@pytest.fixture(scope="session")
def annulus_provider():
    return GreensProvider(DomainSpec("annulus", 3, delta=0.01))


@pytest.fixture
def rng():
    return np.random.default_rng(0)
