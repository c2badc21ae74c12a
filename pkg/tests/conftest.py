import sys

import pytest

from firewater.analysis import find_dns, sweep_gamma_beta
from firewater.ccd import solve_low_branch, solve_multicontrol
from firewater.model import BASE, QUADRATIC, Grid


@pytest.fixture(scope="session")
def base_grid():
    return Grid(100.0, 250)


@pytest.fixture(scope="session")
def base_solve(base_grid):
    return solve_multicontrol(BASE, base_grid, 0.95)


@pytest.fixture(scope="session")
def quad_solve(base_grid):
    return solve_multicontrol(QUADRATIC, base_grid, 0.95)


@pytest.fixture(scope="session")
def low_solve(base_grid):
    return solve_low_branch(BASE, base_grid, 0.013)


@pytest.fixture(scope="session")
def default_sweep():
    return sweep_gamma_beta(BASE, jobs=1)


@pytest.fixture(scope="session")
def dns():
    return find_dns(BASE)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if not lines:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(lines):
        terminalreporter.write_line(lines[n])
