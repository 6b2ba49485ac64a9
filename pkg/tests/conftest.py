import numpy as np
import pytest

from ghostbohm import validate
from ghostbohm.evolve import PacketState
from ghostbohm.scenario import A_RIGID, P_C0, Q_C0

ACCEPTANCE_LINES = []


@pytest.fixture(scope="session")
def run():
    """Cached full-horizon simulation of a built-in preset, shared across test modules."""
    return validate.sim


@pytest.fixture(scope="session")
def biham():
    return validate.biham_run().comparison


@pytest.fixture
def fig1_state():
    return PacketState.make(Q_C0, P_C0, A_RIGID)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
