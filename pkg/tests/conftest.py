import math

import numpy as np
import pytest

from expressive_attempt.kinematics import KinematicChain, Pose, closest_ik

FULL_TURN = ((-math.pi, math.pi), (-math.pi, math.pi))
THREE_R = KinematicChain(False, (0.5, 0.4, 0.15), ((-math.pi, math.pi), (-2.6, 2.6), (-2.0, 2.0)))


@pytest.fixture
def two_link():
    return KinematicChain(False, (1.0, 1.0), FULL_TURN)


@pytest.fixture
def mobile_two_link():
    return KinematicChain(True, (1.0, 1.0), ((-1.0, 1.0), (-1.0, 1.0)) + FULL_TURN)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_configuration(chain, rng):
    return rng.uniform(chain.lower, chain.upper)


def ee_fixed_attempt(T=10, x_f=(0.7, 0.2)):
    """A THREE_R attempt with the tip pinned at ``x_f``: sweep the shoulder, re-solve the distal pair."""
    distal = KinematicChain(False, (0.4, 0.15), ((-math.pi, math.pi), (-2.0, 2.0)))
    x_f = np.asarray(x_f, float)
    xi, prev = [], np.array([-1.2, 0.5])
    for s in np.linspace(0.95, 1.05, T + 1):
        elbow = 0.5 * np.array([math.cos(s), math.sin(s)])
        prev = closest_ik(distal, Pose(x_f - elbow), prev)
        xi.append([s, prev[0] - s, prev[1]])
    return np.array(xi)
