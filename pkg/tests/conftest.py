import numpy as np
import pytest

from wholebody.cli import bundled_fixture
from wholebody.model import (RobotConfiguration, RobotVelocity, load_model,
                             zero_velocity)
from wholebody.spatial import exp_so3


@pytest.fixture(scope="session")
def dp_model():
    return load_model(bundled_fixture("double_pendulum.urdf"))


@pytest.fixture(scope="session")
def pendulum_model():
    return load_model(bundled_fixture("pendulum.urdf"))


@pytest.fixture(scope="session")
def arm2_model():
    return load_model(bundled_fixture("arm2.urdf"))


@pytest.fixture(scope="session")
def arm4_model():
    return load_model(bundled_fixture("arm4.urdf"))


@pytest.fixture(scope="session")
def arm4_floating():
    return load_model(bundled_fixture("arm4.urdf"), floating=True)


@pytest.fixture(scope="session")
def chain5_model():
    return load_model(bundled_fixture("chain5.urdf"))


@pytest.fixture(scope="session")
def floating_chain3():
    return load_model(bundled_fixture("floating_chain3.urdf"), floating=True)


@pytest.fixture(scope="session")
def inertia_one_model():
    return load_model(bundled_fixture("inertia_one.urdf"))


def fixed_config(model, q):
    return RobotConfiguration(np.zeros(3), np.eye(3), np.asarray(q, dtype=float))


def random_state(model, rng, spread=1.0, vel_spread=1.0):
    """Random configuration and velocity; random base pose when floating."""
    q = rng.uniform(-spread, spread, model.dof_count)
    if model.floating:
        config = RobotConfiguration(rng.uniform(-1.0, 1.0, 3),
                                    exp_so3(rng.uniform(-1.0, 1.0, 3)), q)
        velocity = RobotVelocity(rng.uniform(-vel_spread, vel_spread, 3),
                                 rng.uniform(-vel_spread, vel_spread, 3),
                                 rng.uniform(-vel_spread, vel_spread, model.dof_count))
    else:
        config = RobotConfiguration(np.zeros(3), np.eye(3), q)
        velocity = RobotVelocity(np.zeros(3), np.zeros(3),
                                 rng.uniform(-vel_spread, vel_spread, model.dof_count))
    return config, velocity


def rest(model):
    return zero_velocity(model)
