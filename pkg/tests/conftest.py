import pytest

from polyfrag.eigen import DEFAULT_GRID, solve_normalized
from polyfrag.grid import make_grid

ACCEPTANCE_LINES = []


@pytest.fixture(scope="session")
def oracle_solution():
    """Normalized eigenpair for gamma=1, nu=0, uniform kernel on the default grid."""
    return solve_normalized(1.0, 0.0)


@pytest.fixture(scope="session")
def default_grid():
    return make_grid(**DEFAULT_GRID)


@pytest.fixture(scope="session")
def acceptance_log():
    return ACCEPTANCE_LINES


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
