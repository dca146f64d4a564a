import numpy as np
import pytest

from twrsel.core import RngStream


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


@pytest.fixture
def stream():
    return RngStream(12345)
