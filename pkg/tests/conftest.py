import math

import numpy as np
import pytest

from pclab import Cone, HyperbolaBody, ShiftedCone, WulffShape, WeightSpec

SQ2 = math.sqrt(2.0)


@pytest.fixture(scope="session")
def quadrant():
    return Cone.polyhedral([[-1.0, 0.0], [0.0, -1.0]])


@pytest.fixture(scope="session")
def octant():
    return Cone.polyhedral(-np.eye(3))


@pytest.fixture(scope="session")
def c45():
    return Cone.circular([0.0, 0.0, 1.0], math.pi / 4)


@pytest.fixture(scope="session")
def wedge(quadrant):
    return WulffShape(quadrant, [[-SQ2 / 2, -SQ2 / 2]], [SQ2])


@pytest.fixture(scope="session")
def shift(quadrant):
    return ShiftedCone(quadrant, [1.0, 1.0])


@pytest.fixture(scope="session")
def hyp(quadrant):
    return HyperbolaBody(quadrant)


def angle(theta_deg):
    t = math.radians(theta_deg)
    return np.array([[math.cos(t), math.sin(t)]])


def radial_weight(q):
    return WeightSpec.radial_power(q)


def pytest_terminal_summary(terminalreporter):
    import test_acceptance
    if test_acceptance.RESULTS:
        terminalreporter.section("acceptance criteria")
        for k in sorted(test_acceptance.RESULTS):
            terminalreporter.write_line(test_acceptance.RESULTS[k])
