import numpy as np
import pytest

from wholebody.controllers import (PdGravityGains, gravity_compensation_step,
                                   pd_gravity_step)
from wholebody.dynamics import gravity_bias
from wholebody.errors import DimensionMismatch, FixedBaseRequired
from wholebody.interface import ControlMode, initialize
from wholebody.model import RobotConfiguration, RobotVelocity
from wholebody.sim import SimulatedRobot

from conftest import fixed_config


def arm_interface(arm2_model, q0=None, gravity=None, dt=1e-3):
    sim = SimulatedRobot(arm2_model, dt=dt,
                         gravity=np.zeros(3) if gravity == "off" else
                         np.array([0.0, 0.0, -9.81]))
    if q0 is not None:
        sim.reset(fixed_config(arm2_model, q0))
    itf = initialize(arm2_model, None, sim,
                     gravity=np.zeros(3) if gravity == "off" else None)
    itf.actuators.set_control_mode(ControlMode.TORQUE)
    return sim, itf


class TestGains:
    def test_non_positive_gains_rejected(self):
        with pytest.raises(ValueError):
            PdGravityGains(kp=[0.0, 1.0], kd=[1.0, 1.0], setpoint=[0.0, 0.0])
        with pytest.raises(ValueError):
            PdGravityGains(kp=[1.0], kd=[-2.0], setpoint=[0.0])

    def test_length_mismatch_rejected(self):
        with pytest.raises(DimensionMismatch):
            PdGravityGains(kp=[1.0, 1.0], kd=[1.0], setpoint=[0.0, 0.0])

    def test_interface_size_checked(self, arm2_model):
        _, itf = arm_interface(arm2_model)
        gains = PdGravityGains(kp=[1.0], kd=[1.0], setpoint=[0.0])
        with pytest.raises(DimensionMismatch):
            pd_gravity_step(itf, gains)


class TestPdGravityLaw:
    def test_at_setpoint_with_zero_velocity_outputs_gravity(self, arm2_model):
        q_d = np.array([0.6, -0.4])
        _, itf = arm_interface(arm2_model, q0=q_d)
        gains = PdGravityGains(kp=[50.0, 50.0], kd=[10.0, 10.0], setpoint=q_d)
        tau = pd_gravity_step(itf, gains)
        expected = gravity_bias(arm2_model, fixed_config(arm2_model, q_d))
        assert np.array_equal(tau, expected)

    def test_pure_proportional_without_gravity(self, arm2_model):
        q0 = np.array([0.3, -0.1])
        q_d = np.array([0.1, 0.2])
        _, itf = arm_interface(arm2_model, q0=q0, gravity="off")
        gains = PdGravityGains(kp=[5.0, 7.0], kd=[1.0, 1.0], setpoint=q_d)
        tau = pd_gravity_step(itf, gains)
        assert np.allclose(tau, -gains.kp * (q0 - q_d), atol=1e-15)

    def test_setpoint_invariance_random(self, arm2_model):
        rng = np.random.default_rng(0)
        for _ in range(5):
            q_d = rng.uniform(-1.0, 1.0, 2)
            _, itf = arm_interface(arm2_model, q0=q_d)
            gains = PdGravityGains(kp=[40.0, 40.0], kd=[8.0, 8.0], setpoint=q_d)
            tau = pd_gravity_step(itf, gains)
            expected = gravity_bias(arm2_model, fixed_config(arm2_model, q_d))
            assert np.array_equal(tau, expected)

    def test_reference_is_sent_to_backend(self, arm2_model):
        sim, itf = arm_interface(arm2_model, q0=np.array([0.2, 0.2]))
        gains = PdGravityGains(kp=[30.0, 30.0], kd=[5.0, 5.0],
                               setpoint=[0.0, 0.0])
        tau = pd_gravity_step(itf, gains)
        assert np.array_equal(sim.state.references, tau)

    def test_floating_base_rejected(self, floating_chain3):
        sim = SimulatedRobot(floating_chain3)
        itf = initialize(floating_chain3, None, sim)
        gains = PdGravityGains(kp=[1.0, 1.0], kd=[1.0, 1.0], setpoint=[0.0, 0.0])
        with pytest.raises(FixedBaseRequired):
            pd_gravity_step(itf, gains)

    def test_closed_loop_settles_within_five_seconds(self, arm2_model):
        sim, itf = arm_interface(arm2_model)
        gains = PdGravityGains(kp=[50.0, 50.0], kd=[10.0, 10.0],
                               setpoint=[np.pi / 4, -np.pi / 6])
        steps = 5000
        errors = np.empty(steps)
        for k in range(steps):
            pd_gravity_step(itf, gains)
            state = sim.step()
            errors[k] = np.max(np.abs(state.configuration.joint_positions
                                      - gains.setpoint))
        below = errors < 1e-3
        assert below[-1]
        k = steps - 1
        while k >= 0 and below[k]:
            k -= 1
        settle_time = (k + 2) * 1e-3
        assert settle_time < 5.0


class TestGravityCompensation:
    def test_holds_arm_at_rest(self, arm2_model):
        sim, itf = arm_interface(arm2_model, q0=np.array([0.4, -0.9]))
        worst = 0.0
        for _ in range(5000):
            gravity_compensation_step(itf)
            state = sim.step()
            worst = max(worst,
                        float(np.max(np.abs(state.velocity.joint_velocities))))
        assert worst < 1e-3

    def test_zero_gravity_zero_torque(self, arm2_model):
        _, itf = arm_interface(arm2_model, q0=np.array([0.5, 0.5]),
                               gravity="off")
        assert np.allclose(gravity_compensation_step(itf), 0.0, atol=1e-15)

    def test_floating_base_rejected(self, floating_chain3):
        sim = SimulatedRobot(floating_chain3)
        itf = initialize(floating_chain3, None, sim)
        with pytest.raises(FixedBaseRequired):
            gravity_compensation_step(itf)

    def test_torque_depends_only_on_estimates(self, arm2_model):
        # same measured state, two separate backends: identical output
        q0 = np.array([0.3, 0.7])
        _, itf_a = arm_interface(arm2_model, q0=q0)
        _, itf_b = arm_interface(arm2_model, q0=q0)
        assert np.array_equal(gravity_compensation_step(itf_a),
                              gravity_compensation_step(itf_b))
