"""Whole-body control abstraction layer for free-floating multi-body systems.

The package splits into a dynamics stack and a control stack:

* :mod:`wholebody.spatial`, :mod:`wholebody.model`, :mod:`wholebody.dynamics`
  provide rotations/transforms, URDF-loaded kinematic trees and the
  floating-base dynamics engine;
* :mod:`wholebody.interface` exposes the actuators / sensors / state / model
  capabilities a controller programs against, independent of the robot
  behind them;
* :mod:`wholebody.sim` and :mod:`wholebody.replay` are the bundled backends;
* :mod:`wholebody.controllers` and :mod:`wholebody.cli` hold the reference
  controllers and the demo harness.
"""

from .errors import (BackendUnavailable, ConfigError, DimensionMismatch,
                     EmptySelection, EstimateUnavailable, FixedBaseRequired,
                     InvalidInertia, InvalidRotation, InvalidUrdf, MalformedXml,
                     MissingInertial, ModelLoadError, NonTreeTopology,
                     NoSuchSensor, SingularMassMatrix, StaleInterface,
                     UnknownFrame, UnknownJoint, UnsupportedJointType,
                     UnsupportedMode, WholeBodyError)
from .spatial import (Transform, Twist, Wrench, exp_so3, is_rotation,
                      orthonormalize, skew, transform_point)
from .model import (JointLimits, JointSpec, LinkSpec, MultibodyModel,
                    RobotConfiguration, RobotVelocity, canonical_joint_order,
                    load_model, models_equal, neutral_configuration, parse_urdf,
                    to_urdf, zero_velocity)
from .dynamics import (GRAVITY, bias_forces, center_of_mass, forward_dynamics,
                       forward_kinematics, frame_jacobian, gravity_bias,
                       integrate_configuration, inverse_dynamics, kinetic_energy,
                       mass_matrix, potential_energy, spatial_momentum)
from .interface import (ControlMode, DerivativeFilter, DofSelection, EstimateKind,
                        RobotBackend, SensorKind, SensorReading,
                        WholeBodyInterface, initialize)
from .sim import LowLevelGains, SimState, SimulatedRobot, TrajectoryLog
from .replay import ReplayBackend, ReplaySample
from .controllers import (PdGravityGains, gravity_compensation_step,
                          pd_gravity_step)

__version__ = "0.1.0"
