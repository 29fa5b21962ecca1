import numpy as np
import pytest

from stapulse.synthesis import TaskKind, synthesize_pulses, table_coefficients

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture(scope="session")
def row1():
    return table_coefficients(TaskKind.CREATE_ASQS)


@pytest.fixture(scope="session")
def row2():
    return table_coefficients(TaskKind.TWO_LEVEL_TRANSFER)


@pytest.fixture(scope="session")
def row3():
    return table_coefficients(TaskKind.RETURN_TO_ONE)


@pytest.fixture(scope="session")
def row1_pulses(row1):
    return synthesize_pulses(row1)


@pytest.fixture
def rng():
    return np.random.default_rng(20181018)


def random_coefficients(rng, task, spread=0.15):
    """Constraint-satisfying a1..a8 with nonzero odd terms."""
    a = rng.uniform(-spread, spread, 8)
    a[0] = -(3 * a[2] + 5 * a[4] + 7 * a[6])
    a[3] = (task.even_sum - (a[1] + 3 * a[5] + 4 * a[7])) / 2
    return a


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
