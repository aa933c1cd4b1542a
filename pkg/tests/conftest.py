import numpy as np
import pytest

from dyadnet import nn


@pytest.fixture(autouse=True)
def finite_checks():
    """Every op output is validated to be finite inside the test suite."""
    nn.set_finite_check(True)
    yield
    nn.set_finite_check(False)


@pytest.fixture
def rng():
    return np.random.default_rng(0)
