import numpy as np
import pytest

from finsler_angle import fixture, sample_points

X0 = np.array([0.1, -0.2, 0.3])
Y0 = np.array([0.3, 0.5, -0.4])
Y1 = np.array([0.2, -0.4, 0.6])


@pytest.fixture(scope="session")
def flat3():
    return fixture("FLAT3")


@pytest.fixture(scope="session")
def curv3():
    return fixture("CURV3")


@pytest.fixture(scope="session")
def sphere3():
    return fixture("SPHERE3")


@pytest.fixture(scope="session")
def curv3_points(curv3):
    return sample_points(curv3, count=4, seed=3)


@pytest.fixture(scope="session")
def flat3_points(flat3):
    return sample_points(flat3, count=4, seed=3)


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import LINES
    except ImportError:
        return
    if LINES:
        terminalreporter.section("acceptance criteria")
        for line in LINES:
            terminalreporter.write_line(line)
