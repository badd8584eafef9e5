import numpy as np
import pytest

from tpil.mdp import TabularMdp, build_gridworld

# filled by test_acceptance.py, echoed at the end of the run
ACCEPTANCE_LINES = {}


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for key in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[key])


@pytest.fixture(scope="session")
def grid():
    return build_gridworld(10, 4, 2, rng=1)


@pytest.fixture(scope="session")
def small_grid():
    return build_gridworld(4, 2, 1, rng=7)


def random_mdp(rng, S=4, A=2, gamma=0.3):
    T = rng.random((S, A, S)) ** 3
    T /= T.sum(axis=2, keepdims=True)
    rho = rng.random(S) + 0.1
    return TabularMdp(T, rho / rho.sum(), gamma)


def random_policy(rng, S, A):
    pi = rng.random((S, A)) + 1e-3
    return pi / pi.sum(axis=1, keepdims=True)
