import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from slantsweep.geometry import CameraIntrinsics

settings.register_profile(
    "default", deadline=None, max_examples=60, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")

# pass/fail lines filled in by test_acceptance.py, echoed after the run
ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def k_small():
    return CameraIntrinsics(50.0, 55.0, 15.5, 11.5, 32, 24)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
