import numpy as np
import pytest

from phaseless.fixtures import gamma0_system
from phaseless.generators import zwart_powell
from phaseless.sampling import build_patch_system


@pytest.fixture(scope="session")
def g0_system():
    return gamma0_system()


@pytest.fixture(scope="session")
def zp_frame_system():
    return build_patch_system(zwart_powell(), mode="frame", seed=0)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
