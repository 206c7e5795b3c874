import math

import pytest

from mmvgame import model as M
from mmvgame import pde

RHO_REF = (0.0, 0.5, 1.0 / math.sqrt(2.0))

# one line per acceptance criterion, echoed in the terminal summary
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)


REFERENCE_GRID = pde.GridSpec(-6.0, 6.0, 401, 401)


def _solved(model, grid=REFERENCE_GRID):
    return model, pde.solve(model, grid)


@pytest.fixture(scope="session")
def bs():
    return _solved(M.black_scholes(0.4, 0.2))


@pytest.fixture(scope="session")
def ou():
    return _solved(M.ou_tanh(rho=0.5))


@pytest.fixture(scope="session")
def ou_by_rho():
    return {rho: _solved(M.ou_tanh(rho=rho)) for rho in RHO_REF}


@pytest.fixture(scope="session")
def flat():
    """Zero market price of risk: mu equals r."""
    return _solved(M.constant_coefficients(0.02, 0.2, 0.0, 0.3), pde.GridSpec(-2.0, 2.0, 41, 21))
