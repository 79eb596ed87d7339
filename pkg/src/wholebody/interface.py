"""Backend-independent access to a robot for whole-body controllers.

A :class:`WholeBodyInterface` bundles four capabilities:

* ``actuators``  - choose control modes and send references;
* ``sensors``    - latest raw measurements;
* ``state``      - measured or estimated quantities (derivative filters
  fill in joint velocity/acceleration when a backend cannot);
* ``model``      - kinematic and dynamic quantities of the robot.

Controllers address joints through an ordered selection of joint names.
The interface owns the permutation between that controller ordering and
the backend's own ordering, so the same controller runs unchanged against
any backend. Model quantities are always evaluated on the full model,
with unselected joints frozen at their last measured positions and zero
velocity, then projected onto the selected degrees of freedom.
"""
from __future__ import annotations

import abc
import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from . import dynamics
from .errors import (BackendUnavailable, DimensionMismatch, EmptySelection,
                     EstimateUnavailable, ModelLoadError, StaleInterface,
                     UnknownJoint, UnsupportedMode, UrdfError)
from .model import (MultibodyModel, RobotConfiguration, RobotVelocity,
                    load_model, neutral_configuration)
from .spatial import Transform


class ControlMode(Enum):
    POSITION = "position"
    VELOCITY = "velocity"
    TORQUE = "torque"


class SensorKind(Enum):
    ENCODER = "encoder"
    FORCE_TORQUE = "force_torque"
    ACCELEROMETER = "accelerometer"


class EstimateKind(Enum):
    JOINT_POSITION = "joint_position"
    JOINT_VELOCITY = "joint_velocity"
    JOINT_ACCELERATION = "joint_acceleration"
    BASE_POSE = "base_pose"
    BASE_VELOCITY = "base_velocity"


@dataclass(frozen=True)
class SensorReading:
    """One measurement: values, their units and the sample time."""

    kind: SensorKind
    values: np.ndarray
    units: tuple
    timestamp: float

    def __post_init__(self):
        object.__setattr__(self, "values",
                           np.atleast_1d(np.asarray(self.values, dtype=float)))


def rotation_to_quaternion(r) -> np.ndarray:
    """Unit quaternion (w, x, y, z) of a rotation matrix."""
    r = np.asarray(r, dtype=float)
    t = np.trace(r)
    if t > 0.0:
        s = math.sqrt(t + 1.0) * 2.0
        q = np.array([0.25 * s, (r[2, 1] - r[1, 2]) / s,
                      (r[0, 2] - r[2, 0]) / s, (r[1, 0] - r[0, 1]) / s])
    else:
        i = int(np.argmax(np.diag(r)))
        j, k = (i + 1) % 3, (i + 2) % 3
        s = math.sqrt(max(1.0 + r[i, i] - r[j, j] - r[k, k], 0.0)) * 2.0
        q = np.empty(4)
        q[0] = (r[k, j] - r[j, k]) / s
        q[1 + i] = 0.25 * s
        q[1 + j] = (r[j, i] + r[i, j]) / s
        q[1 + k] = (r[k, i] + r[i, k]) / s
    return q / np.linalg.norm(q)


class RobotBackend(abc.ABC):
    """What a robot (real, simulated or replayed) must provide.

    Joint-indexed data uses the backend's own ordering; the interface does
    all remapping.
    """

    @property
    def available(self) -> bool:
        return True

    @abc.abstractmethod
    def joint_names(self) -> tuple:
        """Backend joint ordering."""

    def supported_modes(self) -> frozenset:
        return frozenset(ControlMode)

    @abc.abstractmethod
    def read_sensor(self, kind: SensorKind) -> SensorReading:
        """Latest measurement of the given kind, never blocking."""

    def native_estimate(self, kind: EstimateKind):
        """Backend-computed estimate in backend order, or None."""
        return None

    def base_pose(self) -> Transform | None:
        return None

    def base_velocity(self) -> np.ndarray | None:
        return None

    @abc.abstractmethod
    def set_control_mode(self, indices, mode: ControlMode) -> None:
        """Switch the given backend joints to ``mode``."""

    @abc.abstractmethod
    def set_references(self, indices, values) -> None:
        """Deliver references for the given backend joints."""


class DofSelection:
    """Ordered controlled-joint names plus their permutation into backend order.

    ``permutation[i]`` is the backend index of controller joint ``i``.
    """

    def __init__(self, names, backend_order):
        names = tuple(names)
        if len(set(names)) != len(names):
            dup = sorted({n for n in names if names.count(n) > 1})
            raise ValueError(f"duplicate joint names in selection: {dup}")
        index = {name: i for i, name in enumerate(backend_order)}
        perm = []
        for name in names:
            if name not in index:
                raise UnknownJoint(name)
            perm.append(index[name])
        self.names = names
        self.permutation = np.array(perm, dtype=int)

    @property
    def size(self) -> int:
        return len(self.names)

    def pick(self, backend_values) -> np.ndarray:
        """Backend-order vector -> controller-order vector."""
        return np.asarray(backend_values, dtype=float)[self.permutation]


class DerivativeFilter:
    """Velocity and acceleration from a position stream.

    Two-point backward difference for velocity, second difference for
    acceleration, each smoothed by a first-order low-pass with the given
    cutoff (None disables smoothing). Estimates are exact on linear
    signals once two samples have arrived.
    """

    def __init__(self, cutoff_hz: float | None = 10.0):
        self.cutoff_hz = cutoff_hz
        self.reset()

    def reset(self):
        self._t = None
        self._pos = None
        self._diff = None
        self._vel = None
        self._acc = None

    def _blend(self, previous, raw, dt):
        if previous is None:
            return raw
        if not self.cutoff_hz or self.cutoff_hz <= 0.0:
            return raw
        alpha = dt / (dt + 1.0 / (2.0 * math.pi * self.cutoff_hz))
        return previous + alpha * (raw - previous)

    def update(self, t: float, positions) -> None:
        positions = np.array(positions, dtype=float)
        if self._t is not None and t <= self._t:
            return
        if self._t is None:
            self._t = t
            self._pos = positions
            return
        dt = t - self._t
        diff = (positions - self._pos) / dt
        self._vel = self._blend(self._vel, diff, dt)
        if self._diff is not None:
            self._acc = self._blend(self._acc, (diff - self._diff) / dt, dt)
        self._t = t
        self._pos = positions
        self._diff = diff

    def velocity(self, size: int) -> np.ndarray:
        return np.zeros(size) if self._vel is None else self._vel.copy()

    def acceleration(self, size: int) -> np.ndarray:
        return np.zeros(size) if self._acc is None else self._acc.copy()


class Actuators:
    """Control-mode switching and reference dispatch for the selected joints.

    Out-of-limit references are saturated rather than rejected; the sticky
    ``saturated`` flag and ``saturation_count`` record that it happened.
    """

    def __init__(self, interface):
        self._itf = interface
        self.saturated = False
        self.saturation_count = 0
        limits = [interface.full_model.joint(n).limits
                  for n in interface.selection.names]
        self._effort = np.array([l.effort if l and l.effort is not None else np.inf
                                 for l in limits])
        self._pos_lo = np.array([l.lower if l and l.lower is not None else -np.inf
                                 for l in limits])
        self._pos_hi = np.array([l.upper if l and l.upper is not None else np.inf
                                 for l in limits])

    def clear_saturation(self):
        self.saturated = False
        self.saturation_count = 0

    def _controller_indices(self, joints):
        sel = self._itf.selection
        if joints is None:
            return list(range(sel.size))
        indices = []
        for name in joints:
            if name not in sel.names:
                raise UnknownJoint(name)
            indices.append(sel.names.index(name))
        return indices

    def set_control_mode(self, mode: ControlMode, joints=None) -> None:
        """Switch the given selected joints (default: all) to ``mode``."""
        mode = ControlMode(mode)
        indices = self._controller_indices(joints)
        if not indices:
            return
        if mode not in self._itf.backend.supported_modes():
            raise UnsupportedMode(self._itf.selection.names[indices[0]], mode)
        self._itf.backend.set_control_mode(
            self._itf.selection.permutation[indices], mode)
        for i in indices:
            self._itf._modes[i] = mode

    def set_control_reference(self, values) -> np.ndarray:
        """Send references in controller order; returns what was applied
        after saturation against the model's joint limits."""
        if not self._itf.backend.available:
            raise StaleInterface("backend is no longer available")
        values = np.atleast_1d(np.asarray(values, dtype=float))
        sel = self._itf.selection
        if values.shape != (sel.size,):
            raise DimensionMismatch(
                f"reference has shape {values.shape}, expected ({sel.size},)")
        applied = values.copy()
        modes = self._itf._modes
        for i in range(sel.size):
            if modes[i] is ControlMode.TORQUE:
                lo, hi = -self._effort[i], self._effort[i]
            elif modes[i] is ControlMode.POSITION:
                lo, hi = self._pos_lo[i], self._pos_hi[i]
            else:
                continue
            clamped = min(max(applied[i], lo), hi)
            if clamped != applied[i]:
                applied[i] = clamped
                self.saturated = True
                self.saturation_count += 1
        self._itf.backend.set_references(sel.permutation, applied)
        return applied


class Sensors:
    """Latest raw measurements; encoder values come back in controller order."""

    def __init__(self, interface):
        self._itf = interface

    def read(self, kind: SensorKind) -> SensorReading:
        kind = SensorKind(kind)
        reading = self._itf.backend.read_sensor(kind)
        if kind is not SensorKind.ENCODER:
            return reading
        sel = self._itf.selection
        units = reading.units
        if isinstance(units, tuple) and len(units) == len(reading.values):
            units = tuple(units[i] for i in sel.permutation)
        return SensorReading(kind=kind, values=sel.pick(reading.values),
                             units=units, timestamp=reading.timestamp)


class State:
    """Measured or estimated robot state in controller order.

    Joint positions pass encoder values through. Joint velocity and
    acceleration come from the backend when it provides them natively and
    from the derivative filter otherwise; the calling code is identical
    either way. Base pose/velocity are backend-provided only.
    """

    def __init__(self, interface, filter_cutoff):
        self._itf = interface
        self._filter = DerivativeFilter(filter_cutoff)
        self._last_time = None
        self._positions = None

    def _refresh(self):
        reading = self._itf.backend.read_sensor(SensorKind.ENCODER)
        picked = self._itf.selection.pick(reading.values)
        t = reading.timestamp
        if self._last_time is not None and t < self._last_time:
            self._filter.reset()  # backend was reset; start the stream over
            self._last_time = None
        if self._last_time is None or t > self._last_time:
            self._filter.update(t, picked)
            self._last_time = t
            self._positions = picked

    def get_estimates(self, kind: EstimateKind) -> np.ndarray:
        kind = EstimateKind(kind)
        sel = self._itf.selection
        if kind is EstimateKind.JOINT_POSITION:
            self._refresh()
            return self._positions.copy()
        if kind is EstimateKind.JOINT_VELOCITY:
            self._refresh()
            native = self._itf.backend.native_estimate(kind)
            if native is not None:
                return sel.pick(native)
            return self._filter.velocity(sel.size)
        if kind is EstimateKind.JOINT_ACCELERATION:
            self._refresh()
            native = self._itf.backend.native_estimate(kind)
            if native is not None:
                return sel.pick(native)
            return self._filter.acceleration(sel.size)
        if kind is EstimateKind.BASE_POSE:
            pose = self._itf.backend.base_pose()
            if pose is None:
                raise EstimateUnavailable(kind)
            return np.concatenate([pose.translation,
                                   rotation_to_quaternion(pose.rotation)])
        if kind is EstimateKind.BASE_VELOCITY:
            vel = self._itf.backend.base_velocity()
            if vel is None:
                raise EstimateUnavailable(kind)
            return np.asarray(vel, dtype=float).copy()
        raise EstimateUnavailable(kind)


class ModelView:
    """Dynamics of the full robot projected onto the selected joints.

    Every quantity is computed on the whole model, with unselected joints
    held at their last measured positions and zero velocity; rows and
    columns are then picked and reordered by the selection. Floating-base
    outputs keep their six base rows in front of the selected joint rows.
    """

    def __init__(self, interface):
        self._itf = interface
        model = interface.full_model
        sel = interface.selection
        self._model_perm = np.array([model.dof_index(n) for n in sel.names],
                                    dtype=int)
        # backend joints that exist in the model, for freezing at measurement
        backend_names = interface.backend.joint_names()
        pairs = [(model.dof_index(n), b) for b, n in enumerate(backend_names)
                 if n in model.joint_names]
        self._measured_model_idx = np.array([p[0] for p in pairs], dtype=int)
        self._measured_backend_idx = np.array([p[1] for p in pairs], dtype=int)
        if model.floating:
            self._rows = np.concatenate([np.arange(6), 6 + self._model_perm])
        else:
            self._rows = self._model_perm
        self._neutral = neutral_configuration(model).joint_positions

    @property
    def dofs(self) -> int:
        return self._itf.selection.size

    def _full_config(self, joint_positions, base_pose):
        model = self._itf.full_model
        q = np.atleast_1d(np.asarray(joint_positions, dtype=float))
        if q.shape != (self.dofs,):
            raise DimensionMismatch(
                f"joint positions have shape {q.shape}, expected ({self.dofs},)")
        full = self._neutral.copy()
        if self._measured_model_idx.size:
            measured = self._itf.backend.read_sensor(SensorKind.ENCODER).values
            full[self._measured_model_idx] = measured[self._measured_backend_idx]
        full[self._model_perm] = q
        if model.floating:
            if base_pose is None:
                base_pose = self._itf.backend.base_pose()
            if base_pose is None:
                raise EstimateUnavailable(EstimateKind.BASE_POSE)
            return RobotConfiguration(base_pose.translation, base_pose.rotation, full)
        return RobotConfiguration(np.zeros(3), np.eye(3), full)

    def _full_velocity(self, joint_velocities, base_velocity):
        model = self._itf.full_model
        qd = np.atleast_1d(np.asarray(joint_velocities, dtype=float))
        if qd.shape != (self.dofs,):
            raise DimensionMismatch(
                f"joint velocities have shape {qd.shape}, expected ({self.dofs},)")
        full = np.zeros(model.dof_count)
        full[self._model_perm] = qd
        if model.floating:
            if base_velocity is None:
                base_velocity = self._itf.backend.base_velocity()
            if base_velocity is None:
                base_velocity = np.zeros(6)
            base_velocity = np.asarray(base_velocity, dtype=float)
            return RobotVelocity(base_velocity[0:3], base_velocity[3:6], full)
        return RobotVelocity(np.zeros(3), np.zeros(3), full)

    def _gravity(self, gravity):
        return self._itf.gravity if gravity is None else np.asarray(gravity, float)

    def mass_matrix(self, joint_positions, base_pose=None) -> np.ndarray:
        full = dynamics.mass_matrix(self._itf.full_model,
                                    self._full_config(joint_positions, base_pose))
        return full[np.ix_(self._rows, self._rows)]

    def gravity_bias(self, joint_positions, base_pose=None, gravity=None) -> np.ndarray:
        full = dynamics.gravity_bias(self._itf.full_model,
                                     self._full_config(joint_positions, base_pose),
                                     self._gravity(gravity))
        return full[self._rows]

    def bias_forces(self, joint_positions, joint_velocities, base_pose=None,
                    base_velocity=None, gravity=None) -> np.ndarray:
        full = dynamics.bias_forces(self._itf.full_model,
                                    self._full_config(joint_positions, base_pose),
                                    self._full_velocity(joint_velocities, base_velocity),
                                    self._gravity(gravity))
        return full[self._rows]

    def frame_jacobian(self, frame, joint_positions, base_pose=None) -> np.ndarray:
        full = dynamics.frame_jacobian(self._itf.full_model,
                                       self._full_config(joint_positions, base_pose),
                                       frame)
        return full[:, self._rows]

    def forward_kinematics(self, joint_positions, base_pose=None) -> dict:
        return dynamics.forward_kinematics(
            self._itf.full_model, self._full_config(joint_positions, base_pose))


class WholeBodyInterface:
    """The four capabilities plus the joint selection behind them.

    Owned by one control loop at a time; values returned are snapshots.
    """

    def __init__(self, model: MultibodyModel, selection: DofSelection,
                 backend: RobotBackend, gravity=None, filter_cutoff: float = 10.0):
        self.full_model = model
        self.selection = selection
        self.backend = backend
        self.gravity = (dynamics.GRAVITY.copy() if gravity is None
                        else np.asarray(gravity, dtype=float))
        self._modes = [ControlMode.TORQUE] * selection.size
        self.actuators = Actuators(self)
        self.sensors = Sensors(self)
        self.state = State(self, filter_cutoff)
        self.model = ModelView(self)

    @property
    def dofs(self) -> int:
        return self.selection.size

    @property
    def joint_names(self) -> tuple:
        return self.selection.names

    @property
    def floating(self) -> bool:
        return self.full_model.floating


def initialize(model, joints, backend: RobotBackend, *, floating: bool = False,
               gravity=None, filter_cutoff: float = 10.0) -> WholeBodyInterface:
    """Wire a model, a controlled-joint selection and a backend together.

    ``model`` is a :class:`MultibodyModel` or a URDF file path (``floating``
    applies only in the path case). ``joints`` lists controlled joint names
    in the order the controller wants them; None selects every model joint
    in canonical order.
    """
    if backend is None or not backend.available:
        raise BackendUnavailable("no usable backend")
    if isinstance(model, (str, bytes)) or hasattr(model, "__fspath__"):
        try:
            model = load_model(model, floating=floating)
        except (UrdfError, ModelLoadError) as e:
            raise ModelLoadError(str(e)) from e
    if joints is None:
        joints = model.joint_names
    joints = tuple(joints)
    if not joints:
        raise EmptySelection("an empty controlled-joint selection is not usable")
    model_joints = set(model.joint_names)
    for name in joints:
        if name not in model_joints:
            raise UnknownJoint(name)
    selection = DofSelection(joints, backend.joint_names())
    return WholeBodyInterface(model, selection, backend, gravity=gravity,
                              filter_cutoff=filter_cutoff)
