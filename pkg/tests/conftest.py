import pytest

from twoion.crystal import BeamGeometry, IonSpecies, TrapConfig
from twoion.constants import TWO_PI

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def trap():
    return TrapConfig(TWO_PI * 700e3, TWO_PI * 1.8e6, TWO_PI * 1.8e6)


@pytest.fixture
def species():
    return IonSpecies()


@pytest.fixture
def beam():
    return BeamGeometry()


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
