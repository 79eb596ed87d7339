import numpy as np
import pytest

from wholebody.dynamics import (GRAVITY, bias_forces, center_of_mass,
                                forward_dynamics, forward_kinematics,
                                frame_jacobian, gravity_bias,
                                integrate_configuration, inverse_dynamics,
                                kinetic_energy, mass_matrix, potential_energy,
                                spatial_momentum)
from wholebody.errors import (DimensionMismatch, SingularMassMatrix,
                              UnknownFrame)
from wholebody.model import (RobotConfiguration, RobotVelocity, parse_urdf,
                             zero_velocity)
from wholebody.spatial import Wrench, exp_so3

from conftest import fixed_config, random_state
from oracles import (dp_coriolis, dp_gravity, dp_inverse_dynamics,
                     dp_mass_matrix, fd_frame_twist, fd_gravity_torques,
                     jacobian_mass_matrix, potential_from_fk,
                     random_chain_urdf)

FLOATING_BODY = """
<robot name="brick">
  <link name="body">
    <inertial>
      <mass value="2.5"/>
      <inertia ixx="0.1" ixy="0" ixz="0" iyy="0.12" iyz="0" izz="0.08"/>
    </inertial>
  </link>
</robot>
"""

BRANCHED = """
<robot name="branched">
  <link name="base"><inertial><mass value="1"/>
    <inertia ixx="0.1" ixy="0" ixz="0" iyy="0.1" iyz="0" izz="0.1"/>
  </inertial></link>
  <link name="left"><inertial><mass value="0.5"/>
    <inertia ixx="0.01" ixy="0" ixz="0" iyy="0.01" iyz="0" izz="0.01"/>
  </inertial></link>
  <link name="right"><inertial><mass value="0.5"/>
    <inertia ixx="0.01" ixy="0" ixz="0" iyy="0.01" iyz="0" izz="0.01"/>
  </inertial></link>
  <joint name="jl" type="revolute">
    <parent link="base"/><child link="left"/>
    <origin xyz="0.2 0 0"/><axis xyz="0 0 1"/>
  </joint>
  <joint name="jr" type="revolute">
    <parent link="base"/><child link="right"/>
    <origin xyz="-0.2 0 0"/><axis xyz="0 1 0"/>
  </joint>
</robot>
"""

LEVER = """
<robot name="lever">
  <link name="base"><inertial><mass value="1"/>
    <inertia ixx="0.1" ixy="0" ixz="0" iyy="0.1" iyz="0" izz="0.1"/>
  </inertial></link>
  <link name="mid"><inertial><mass value="0.4"/>
    <inertia ixx="0.01" ixy="0" ixz="0" iyy="0.01" iyz="0" izz="0.01"/>
  </inertial></link>
  <link name="tip"><inertial><mass value="0.2"/>
    <inertia ixx="0.005" ixy="0" ixz="0" iyy="0.005" iyz="0" izz="0.005"/>
  </inertial></link>
  <joint name="swing" type="revolute">
    <parent link="base"/><child link="mid"/>
    <axis xyz="0 0 1"/>
  </joint>
  <joint name="offset" type="fixed">
    <parent link="mid"/><child link="tip"/>
    <origin xyz="1 0 0"/>
  </joint>
</robot>
"""


class TestForwardKinematics:
    def test_translated_joint_at_zero_angles(self):
        doc = LEVER.replace('<axis xyz="0 0 1"/>',
                            '<origin xyz="0 0 1"/><axis xyz="0 0 1"/>')
        model = parse_urdf(doc)
        poses = forward_kinematics(model, fixed_config(model, [0.0]))
        assert np.allclose(poses["mid"].translation, [0.0, 0.0, 1.0])

    def test_quarter_turn_moves_offset_child(self):
        model = parse_urdf(LEVER)
        poses = forward_kinematics(model, fixed_config(model, [np.pi / 2]))
        assert np.allclose(poses["tip"].translation, [0.0, 1.0, 0.0],
                           atol=1e-12)

    def test_base_pose_passthrough(self, floating_chain3):
        rng = np.random.default_rng(0)
        config, _ = random_state(floating_chain3, rng)
        poses = forward_kinematics(floating_chain3, config)
        assert np.array_equal(poses["body"].translation, config.base_position)
        assert np.array_equal(poses["body"].rotation, config.base_rotation)

    def test_base_translation_shifts_all_frames(self, floating_chain3):
        q = np.array([0.4, -0.7])
        at_origin = RobotConfiguration(np.zeros(3), np.eye(3), q)
        shifted = RobotConfiguration(np.array([1.0, 2.0, 3.0]), np.eye(3), q)
        p0 = forward_kinematics(floating_chain3, at_origin)
        p1 = forward_kinematics(floating_chain3, shifted)
        for name in floating_chain3.frame_names:
            assert np.allclose(p1[name].translation - p0[name].translation,
                               [1.0, 2.0, 3.0])
            assert np.array_equal(p1[name].rotation, p0[name].rotation)

    def test_dimension_mismatch(self, dp_model):
        with pytest.raises(DimensionMismatch):
            forward_kinematics(dp_model, fixed_config(dp_model, [0.0]))


class TestFrameJacobian:
    def test_floating_base_frame_is_identity_block(self, floating_chain3):
        rng = np.random.default_rng(1)
        for _ in range(5):
            config, _ = random_state(floating_chain3, rng)
            jac = frame_jacobian(floating_chain3, config, "body")
            assert np.allclose(jac[:, :6], np.eye(6))
            assert np.allclose(jac[:, 6:], 0.0)

    def test_single_revolute_column(self):
        model = parse_urdf(LEVER)
        jac = frame_jacobian(model, fixed_config(model, [0.0]), "tip")
        assert np.allclose(jac[0:3, 0], [0.0, 1.0, 0.0])
        assert np.allclose(jac[3:6, 0], [0.0, 0.0, 1.0])

    def test_off_path_columns_zero(self):
        model = parse_urdf(BRANCHED)
        config = fixed_config(model, [0.3, -0.8])
        jl = model.dof_index("jl")
        jr = model.dof_index("jr")
        assert np.allclose(frame_jacobian(model, config, "left")[:, jr], 0.0)
        assert np.allclose(frame_jacobian(model, config, "right")[:, jl], 0.0)

    def test_unknown_frame(self, dp_model):
        with pytest.raises(UnknownFrame):
            frame_jacobian(dp_model, fixed_config(dp_model, [0.0, 0.0]), "nope")

    def test_matches_finite_difference_twist(self, arm4_floating):
        rng = np.random.default_rng(2)
        for _ in range(10):
            config, velocity = random_state(arm4_floating, rng)
            nu = velocity.to_generalized(True)
            for frame in arm4_floating.frame_names:
                jac = frame_jacobian(arm4_floating, config, frame)
                fd = fd_frame_twist(arm4_floating, config, velocity, frame)
                assert np.max(np.abs(jac @ nu - fd)) < 1e-6


class TestMassMatrix:
    def test_double_pendulum_stretched(self, dp_model):
        m = mass_matrix(dp_model, fixed_config(dp_model, [0.0, 0.0]))
        assert np.allclose(m, [[5.0, 2.0], [2.0, 1.0]], atol=1e-12)

    def test_double_pendulum_bent(self, dp_model):
        m = mass_matrix(dp_model, fixed_config(dp_model, [0.0, np.pi / 2]))
        assert np.allclose(m, [[3.0, 1.0], [1.0, 1.0]], atol=1e-12)

    def test_double_pendulum_oracle_random(self, dp_model):
        rng = np.random.default_rng(3)
        for _ in range(30):
            q = rng.uniform(-3.0, 3.0, 2)
            m = mass_matrix(dp_model, fixed_config(dp_model, q))
            assert np.max(np.abs(m - dp_mass_matrix(q[1]))) < 1e-9

    def test_floating_body_translation_block(self):
        model = parse_urdf(FLOATING_BODY, floating=True)
        rng = np.random.default_rng(4)
        config, _ = random_state(model, rng)
        m = mass_matrix(model, config)
        assert np.allclose(m[0:3, 0:3], 2.5 * np.eye(3), atol=1e-12)

    def test_symmetry_and_positive_definiteness(self, arm4_floating,
                                                 chain5_model):
        rng = np.random.default_rng(5)
        for model in (arm4_floating, chain5_model):
            for _ in range(10):
                config, _ = random_state(model, rng)
                m = mass_matrix(model, config)
                assert np.max(np.abs(m - m.T)) < 1e-9
                np.linalg.cholesky(m)

    def test_matches_jacobian_assembly(self):
        rng = np.random.default_rng(6)
        for trial in range(6):
            n = int(rng.integers(1, 6))
            floating = trial % 2 == 0
            model = parse_urdf(random_chain_urdf(rng, n), floating=floating)
            config, _ = random_state(model, rng)
            m = mass_matrix(model, config)
            assert np.max(np.abs(m - jacobian_mass_matrix(model, config))) < 1e-10

    def test_kinetic_energy_quadratic_form(self, chain5_model):
        rng = np.random.default_rng(7)
        config, velocity = random_state(chain5_model, rng)
        nu = velocity.to_generalized(False)
        expected = 0.5 * nu @ mass_matrix(chain5_model, config) @ nu
        assert kinetic_energy(chain5_model, config, velocity) == pytest.approx(expected)


class TestGravityBias:
    def test_horizontal_pendulum_torque(self, pendulum_model):
        config = fixed_config(pendulum_model, [np.pi / 2])
        g = gravity_bias(pendulum_model, config)
        assert abs(abs(g[0]) - 4.905) < 1e-9
        fd = fd_gravity_torques(pendulum_model, config, GRAVITY)
        assert np.max(np.abs(g - fd)) < 1e-6

    def test_zero_gravity(self, arm4_model):
        rng = np.random.default_rng(8)
        config, _ = random_state(arm4_model, rng)
        assert np.allclose(gravity_bias(arm4_model, config, np.zeros(3)), 0.0)

    def test_hanging_equilibrium(self, pendulum_model):
        g = gravity_bias(pendulum_model, fixed_config(pendulum_model, [0.0]))
        assert np.allclose(g, 0.0, atol=1e-12)

    def test_matches_potential_gradient(self, chain5_model):
        rng = np.random.default_rng(9)
        for _ in range(5):
            config, _ = random_state(chain5_model, rng)
            g = gravity_bias(chain5_model, config)
            fd = fd_gravity_torques(chain5_model, config, GRAVITY)
            assert np.max(np.abs(g - fd)) < 1e-5


class TestBiasForces:
    def test_zero_velocity_equals_gravity_bias(self, arm4_floating):
        rng = np.random.default_rng(10)
        config, _ = random_state(arm4_floating, rng)
        still = zero_velocity(arm4_floating)
        assert np.array_equal(bias_forces(arm4_floating, config, still),
                              gravity_bias(arm4_floating, config))

    def test_double_pendulum_coriolis_frozen_case(self, dp_model):
        # q2 = pi/2, qd = (1, 0), zero gravity: closed form gives (0, 1)
        config = fixed_config(dp_model, [0.0, np.pi / 2])
        velocity = RobotVelocity(np.zeros(3), np.zeros(3), np.array([1.0, 0.0]))
        out = bias_forces(dp_model, config, velocity, gravity=np.zeros(3))
        assert np.allclose(out, [0.0, 1.0], atol=1e-12)

    def test_double_pendulum_coriolis_oracle(self, dp_model):
        rng = np.random.default_rng(11)
        for _ in range(20):
            q = rng.uniform(-3.0, 3.0, 2)
            qd = rng.uniform(-2.0, 2.0, 2)
            config = fixed_config(dp_model, q)
            velocity = RobotVelocity(np.zeros(3), np.zeros(3), qd)
            coriolis = (bias_forces(dp_model, config, velocity)
                        - gravity_bias(dp_model, config))
            assert np.max(np.abs(coriolis - dp_coriolis(q[1], qd))) < 1e-9

    def test_single_axis_no_coriolis(self, pendulum_model):
        velocity = RobotVelocity(np.zeros(3), np.zeros(3), np.array([3.0]))
        out = bias_forces(pendulum_model, fixed_config(pendulum_model, [0.7]),
                          velocity, gravity=np.zeros(3))
        assert np.allclose(out, 0.0, atol=1e-12)


class TestInverseDynamics:
    def test_still_equals_gravity_bias(self, chain5_model):
        rng = np.random.default_rng(12)
        config, _ = random_state(chain5_model, rng)
        still = zero_velocity(chain5_model)
        out = inverse_dynamics(chain5_model, config, still, np.zeros(5))
        assert np.array_equal(out, gravity_bias(chain5_model, config))

    def test_all_zero(self, chain5_model):
        config = fixed_config(chain5_model, np.zeros(5))
        out = inverse_dynamics(chain5_model, config, zero_velocity(chain5_model),
                               np.zeros(5), gravity=np.zeros(3))
        assert np.allclose(out, 0.0, atol=1e-12)

    def test_double_pendulum_oracle(self, dp_model):
        rng = np.random.default_rng(13)
        for _ in range(30):
            q = rng.uniform(-3.0, 3.0, 2)
            qd = rng.uniform(-2.0, 2.0, 2)
            qdd = rng.uniform(-2.0, 2.0, 2)
            config = fixed_config(dp_model, q)
            velocity = RobotVelocity(np.zeros(3), np.zeros(3), qd)
            out = inverse_dynamics(dp_model, config, velocity, qdd)
            assert np.max(np.abs(out - dp_inverse_dynamics(q, qd, qdd))) < 1e-9

    def test_contact_term_subtracts_jacobian_transpose(self, arm4_floating):
        rng = np.random.default_rng(14)
        config, velocity = random_state(arm4_floating, rng)
        accel = rng.uniform(-1.0, 1.0, arm4_floating.velocity_dim)
        wrench = Wrench(rng.uniform(-5.0, 5.0, 3), rng.uniform(-2.0, 2.0, 3))
        plain = inverse_dynamics(arm4_floating, config, velocity, accel)
        with_contact = inverse_dynamics(arm4_floating, config, velocity, accel,
                                        contacts=[("slider", wrench)])
        jac = frame_jacobian(arm4_floating, config, "slider")
        assert np.allclose(plain - jac.T @ wrench.to_array(), with_contact,
                           atol=1e-12)

    def test_contact_unknown_frame(self, dp_model):
        with pytest.raises(UnknownFrame):
            inverse_dynamics(dp_model, fixed_config(dp_model, [0.0, 0.0]),
                             zero_velocity(dp_model), np.zeros(2),
                             contacts=[("missing", Wrench.zero())])


class TestForwardDynamics:
    def test_rest_no_forces(self, chain5_model):
        config = fixed_config(chain5_model, np.zeros(5))
        out = forward_dynamics(chain5_model, config, zero_velocity(chain5_model),
                               np.zeros(5), gravity=np.zeros(3))
        assert np.allclose(out, 0.0, atol=1e-12)

    def test_unit_inertia_scalar(self, inertia_one_model):
        config = fixed_config(inertia_one_model, [0.3])
        out = forward_dynamics(inertia_one_model, config,
                               zero_velocity(inertia_one_model), [2.0],
                               gravity=np.zeros(3))
        assert out[0] == pytest.approx(2.0, abs=1e-12)

    def test_round_trip_random_chains(self):
        rng = np.random.default_rng(15)
        for trial in range(20):
            n = int(rng.integers(1, 7))
            floating = trial % 2 == 1
            model = parse_urdf(random_chain_urdf(rng, n), floating=floating)
            config, velocity = random_state(model, rng)
            accel = rng.uniform(-1.0, 1.0, model.velocity_dim)
            force = inverse_dynamics(model, config, velocity, accel)
            if floating:
                tau, contacts = force[6:], [(model.base_link, force[0:6])]
            else:
                tau, contacts = force, None
            recovered = forward_dynamics(model, config, velocity, tau,
                                         contacts=contacts)
            assert np.max(np.abs(recovered - accel)) < 1e-8

    def test_singular_mass_matrix(self):
        doc = """
        <robot name="massless_tip">
          <link name="base"><inertial><mass value="1"/>
            <inertia ixx="0.1" ixy="0" ixz="0" iyy="0.1" iyz="0" izz="0.1"/>
          </inertial></link>
          <link name="ghost"><inertial><mass value="0"/>
            <inertia ixx="0" ixy="0" ixz="0" iyy="0" iyz="0" izz="0"/>
          </inertial></link>
          <joint name="j" type="revolute">
            <parent link="base"/><child link="ghost"/><axis xyz="0 0 1"/>
          </joint>
        </robot>
        """
        model = parse_urdf(doc)
        assert model.warnings
        with pytest.raises(SingularMassMatrix):
            forward_dynamics(model, fixed_config(model, [0.0]),
                             zero_velocity(model), [0.0])

    def test_dimension_mismatch(self, dp_model):
        with pytest.raises(DimensionMismatch):
            forward_dynamics(dp_model, fixed_config(dp_model, [0.0, 0.0]),
                             zero_velocity(dp_model), [0.0, 0.0, 0.0])


class TestFrameInvariance:
    def test_base_translation_preserves_joint_blocks(self, floating_chain3):
        q = np.array([0.5, -0.3])
        vel = RobotVelocity(np.zeros(3), np.zeros(3), np.zeros(2))
        a = RobotConfiguration(np.zeros(3), np.eye(3), q)
        b = RobotConfiguration(np.array([5.0, -2.0, 1.0]), np.eye(3), q)
        ma = mass_matrix(floating_chain3, a)
        mb = mass_matrix(floating_chain3, b)
        assert np.allclose(ma[6:, 6:], mb[6:, 6:], atol=1e-12)
        ga = gravity_bias(floating_chain3, a)
        gb = gravity_bias(floating_chain3, b)
        assert np.allclose(ga[6:], gb[6:], atol=1e-12)


class TestEnergyAndMomentum:
    def test_potential_energy_direct_sum(self, arm4_floating):
        rng = np.random.default_rng(16)
        config, _ = random_state(arm4_floating, rng)
        assert potential_energy(arm4_floating, config) == pytest.approx(
            potential_from_fk(arm4_floating, config, GRAVITY))

    def test_spatial_momentum_matches_link_sum(self, floating_chain3):
        from oracles import link_momentum_sum
        rng = np.random.default_rng(17)
        for _ in range(5):
            config, velocity = random_state(floating_chain3, rng)
            h = spatial_momentum(floating_chain3, config, velocity)
            assert np.max(np.abs(h - link_momentum_sum(
                floating_chain3, config, velocity))) < 1e-10

    def test_spatial_momentum_fixed_base_rejected(self, dp_model):
        with pytest.raises(ValueError):
            spatial_momentum(dp_model, fixed_config(dp_model, [0.0, 0.0]),
                             zero_velocity(dp_model))

    def test_center_of_mass_single_body(self):
        model = parse_urdf(FLOATING_BODY, floating=True)
        config = RobotConfiguration(np.array([1.0, 2.0, 3.0]), np.eye(3),
                                    np.zeros(0))
        assert np.allclose(center_of_mass(model, config), [1.0, 2.0, 3.0])


class TestIntegrateConfiguration:
    def test_joint_positions_advance_linearly(self, dp_model):
        config = fixed_config(dp_model, [0.1, 0.2])
        velocity = RobotVelocity(np.zeros(3), np.zeros(3), np.array([1.0, -2.0]))
        nxt = integrate_configuration(dp_model, config, velocity, 0.5)
        assert np.allclose(nxt.joint_positions, [0.6, -0.8])

    def test_rotation_stays_orthonormal(self, floating_chain3):
        rng = np.random.default_rng(18)
        config, velocity = random_state(floating_chain3, rng)
        for _ in range(200):
            config = integrate_configuration(floating_chain3, config, velocity,
                                             1e-2)
        r = config.base_rotation
        assert np.max(np.abs(r.T @ r - np.eye(3))) < 1e-9
