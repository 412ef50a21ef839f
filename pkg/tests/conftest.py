import numpy as np
import pytest

from mflab.measures import RngSpec


@pytest.fixture
def gen():
    return np.random.Generator(np.random.Philox(20240611))


@pytest.fixture
def rng():
    return RngSpec(7)


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1])):
            terminalreporter.write_line(line)
