"""Shared trajectories. Solves are session-scoped so the suite pays for each once."""

import numpy as np
import pytest

from parabolic_asymptotics import (
    Grid, SolveConfig, gauss_field, make_convection, make_keller_segel, make_semilinear, solve,
)


@pytest.fixture(scope="session")
def grid1():
    return Grid.default(1)


@pytest.fixture(scope="session")
def convection_run(grid1):
    """u_t = u_xx + (u^3)_x from 0.1 G(x, 1), T = 200."""
    nl = make_convection([1.0], 3.0)
    traj = solve(nl, gauss_field(grid1, 1.0, mass=0.1), SolveConfig(horizon=200.0))
    return nl, traj


@pytest.fixture(scope="session")
def convection_run_refined(grid1):
    nl = make_convection([1.0], 3.0)
    traj = solve(nl, gauss_field(grid1, 1.0, mass=0.1), SolveConfig(horizon=200.0, refine=2))
    return nl, traj


@pytest.fixture(scope="session")
def keller_segel_run(grid1):
    """Parabolic-parabolic Keller-Segel from 0.05 G(x, 1), v(0) = 0, T = 100."""
    nl = make_keller_segel(1)
    traj = solve(nl, gauss_field(grid1, 1.0, mass=0.05), SolveConfig(horizon=100.0, dt_max=0.25))
    return nl, traj


@pytest.fixture(scope="session")
def semilinear_run(grid1):
    """u_t = u_xx + |u|^3 u from 0.5 G(x, 1), T = 200."""
    nl = make_semilinear(1.0, 4.0)
    traj = solve(nl, gauss_field(grid1, 1.0, mass=0.5), SolveConfig(horizon=200.0))
    return nl, traj


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[0][2:])):
            terminalreporter.write_line(line)
