import numpy as np
import pytest

from manetsim.core.geometry import Position
from manetsim.core.radio import RadioModel
from manetsim.core.scenario import build_config


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def ideal_radio():
    return RadioModel()


@pytest.fixture
def noisy_radio():
    return RadioModel(timestamp_noise_sigma=5e-9)


@pytest.fixture
def small_config():
    return build_config(preset="small", seed=7)


def random_points(rng, count, span=500.0):
    return [Position(float(x), float(y)) for x, y in rng.uniform(-span / 2, span / 2, size=(count, 2))]
