import numpy as np
import pytest

from hyperhelm.model import CoefficientProfile, RadialGeometry
from hyperhelm.resolvent import homogeneous_pair


@pytest.fixture(scope="session")
def h3():
    return RadialGeometry.hyperbolic(3)


@pytest.fixture(scope="session")
def pair_h3_lam1(h3):
    return homogeneous_pair(h3, 1.0, 30.0, 1e-11)


@pytest.fixture(scope="session")
def pair_h3_lam2(h3):
    return homogeneous_pair(h3, 2.0, 40.0, 1e-10)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
