import os
import sys

import pytest
from hypothesis import HealthCheck, settings

from epcert import GridSpec, LogCoshSite, Target

sys.path.insert(0, os.path.dirname(__file__))

settings.register_profile("default", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

# 2**11 base intervals already resolve every test density to rounding level
FAST = GridSpec(points=2**11)


@pytest.fixture(scope="session")
def fast():
    return FAST


@pytest.fixture(scope="session")
def four_site():
    return Target([LogCoshSite(0.3, 1.0, 0.5), LogCoshSite(-0.7, 1.2, 0.8),
                   LogCoshSite(1.0, 0.9, 0.3), LogCoshSite(0.0, 1.0, 0.6)])
