import math

import pytest

from exactwkb.formal import wkb_recursion
from exactwkb.geometry import LiouvilleFrame
from exactwkb.laplace import ExactSolution
from exactwkb.problems import builtin

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture(scope="session")
def airy():
    return builtin("airy")


@pytest.fixture(scope="session")
def airy_roots(airy):
    return wkb_recursion(airy, 12)


@pytest.fixture(scope="session")
def airy_frame(airy):
    return LiouvilleFrame(airy, 1.0)


@pytest.fixture(scope="session")
def airy_solution(airy, airy_roots):
    return ExactSolution(airy, 1.0, theta=0.0, theta_minus=0.3, roots=airy_roots)


@pytest.fixture(scope="session")
def weber_solution():
    return ExactSolution(builtin("weber", a=4), 3.0, theta=0.0, theta_minus=0.3)


@pytest.fixture(scope="session")
def mathieu_frame():
    return LiouvilleFrame(builtin("mathieu"), math.pi, 1, math.pi / 2)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
