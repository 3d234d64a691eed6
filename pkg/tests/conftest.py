import numpy as np
import pytest

from fbmcest.fbcore import design_prototype
from fbmcest.interference import closed_form_weights


@pytest.fixture(scope="session")
def filt512():
    return design_prototype(512, 3)


@pytest.fixture(scope="session")
def table512(filt512):
    return closed_form_weights(filt512)


@pytest.fixture(scope="session")
def filt64():
    return design_prototype(64, 3)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
