import os
import sys

import pytest
from hypothesis import HealthCheck, settings

sys.path.insert(0, os.path.dirname(__file__))

settings.register_profile("default", max_examples=40, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture(scope="session")
def model():
    from anosovforms.model import build_default_model

    return build_default_model()


@pytest.fixture(scope="session")
def rates(model):
    from anosovforms.asymmetry import is_asymmetric

    return is_asymmetric(model, samples=20).worst
