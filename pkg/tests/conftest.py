import os
import sys

import pytest

sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), "..")))

from ergo import WeightSequence  # noqa: E402
from qmodel import CatastropheProfile, QueueModel, RateExpr, large_server_example  # noqa: E402


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: long-running acceptance scenarios")


@pytest.fixture
def example_model():
    return large_server_example()


@pytest.fixture
def doubling():
    return WeightSequence.doubling()


@pytest.fixture
def mm1():
    """M/M/1 with lambda = 1, mu = 2 and no catastrophes."""
    return QueueModel(1, RateExpr.constant(1.0), RateExpr.constant(2.0), RateExpr.zero())


@pytest.fixture
def catastrophe_model():
    """lambda = 1 + sin 2pi t, mu = 1, xi = 3, zeta = 1, S = 10."""
    return QueueModel(10, RateExpr.sinusoid(1.0, sin_amp=1.0), RateExpr.constant(1.0),
                      RateExpr.constant(3.0), CatastropheProfile.constant(1.0))
