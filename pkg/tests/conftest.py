import math

import pytest

from rotordive.dynamics import BodyParams, DimensionlessParams

GAMMA = 19.0

# acceptance lines collected by tests/test_acceptance.py
ACCEPTANCE_LINES: list[str] = []
# closed forms checked against their defining integrals
FLAG_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if FLAG_LINES:
        terminalreporter.section("closed-form adjudication")
        for line in FLAG_LINES:
            terminalreporter.write_line(line)
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)


def symmetric_body(l: float) -> BodyParams:
    # I1 = I2 = 20, I3 = 1 gives gamma = 19
    return BodyParams(20.0, 20.0, 1.0, l)


def general_body(delta: float, l: float) -> BodyParams:
    return BodyParams(20.0, 20.0 / (1.0 + delta), 1.0, l)


@pytest.fixture
def sym_d():
    return DimensionlessParams(0.0, GAMMA)


@pytest.fixture
def two_pi():
    return 2.0 * math.pi
