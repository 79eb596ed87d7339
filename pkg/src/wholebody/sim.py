"""Simulated robot: integrates the equations of motion with a fixed step.

The simulator implements the backend contract of :mod:`wholebody.interface`
so controllers drive it exactly like a real robot. Joint torques are
assembled per control mode (torque references pass through, position and
velocity references go through emulated low-level PD / P loops), then a
semi-implicit Euler step advances the state: velocity first, positions
with the updated velocity, the base rotation through the exponential map
with re-orthonormalization.

Ground reaction or other environment forces are not modelled; external
wrenches are user-supplied and time-limited.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from .dynamics import (GRAVITY, forward_dynamics, integrate_configuration,
                       mass_matrix)
from .errors import DimensionMismatch, NoSuchSensor, UnknownFrame
from .interface import (ControlMode, EstimateKind, RobotBackend, SensorKind,
                        SensorReading, rotation_to_quaternion)
from .model import (PRISMATIC, MultibodyModel, RobotConfiguration, RobotVelocity,
                    check_dimensions, neutral_configuration, zero_velocity)
from .spatial import Transform, Wrench, check_rotation

MAX_STEP = 0.01


@dataclass(frozen=True)
class LowLevelGains:
    """Gains of the emulated low-level joint controllers (one entry per
    model joint, canonical order): kp/kd serve position mode, kv velocity
    mode."""

    kp: np.ndarray
    kd: np.ndarray
    kv: np.ndarray

    def __post_init__(self):
        for name in ("kp", "kd", "kv"):
            v = np.atleast_1d(np.asarray(getattr(self, name), dtype=float))
            if np.any(v < 0.0):
                raise ValueError(f"{name} gains must be non-negative")
            object.__setattr__(self, name, v)

    @classmethod
    def defaults(cls, model: MultibodyModel) -> "LowLevelGains":
        """kp = 100 with critical-ish damping kd = 2 sqrt(kp * M_ii) taken at
        the neutral configuration; kv follows kd."""
        kp = np.full(model.dof_count, 100.0)
        m = mass_matrix(model, neutral_configuration(model))
        diag = np.diag(m)[6:] if model.floating else np.diag(m)
        kd = 2.0 * np.sqrt(kp * np.maximum(diag, 0.0))
        return cls(kp=kp, kd=kd, kv=kd.copy())


@dataclass(frozen=True)
class SimState:
    """Snapshot of the plant after a step."""

    configuration: RobotConfiguration
    velocity: RobotVelocity
    time: float
    modes: tuple
    references: np.ndarray
    applied_torques: np.ndarray
    contacts: tuple


class SimulatedRobot(RobotBackend):
    """Fixed-step simulated robot over a multibody model.

    Single-owner: step() and reads must not interleave from concurrent
    callers. Encoder noise is optional additive Gaussian from a seeded
    generator, frozen within a step so repeated reads agree.
    """

    def __init__(self, model: MultibodyModel, dt: float = 1e-3, gravity=GRAVITY,
                 gains: LowLevelGains | None = None, noise_std: float = 0.0,
                 noise_seed: int = 0, native_velocity: bool = True):
        if not 0.0 < dt <= MAX_STEP:
            raise ValueError(f"dt must be in (0, {MAX_STEP}], got {dt}")
        self.model = model
        self.dt = float(dt)
        self.gravity = np.asarray(gravity, dtype=float)
        self.gains = gains if gains is not None else LowLevelGains.defaults(model)
        if self.gains.kp.shape != (model.dof_count,):
            raise DimensionMismatch("low-level gains do not match the model")
        self.noise_std = float(noise_std)
        self._seed = noise_seed
        self.native_velocity = bool(native_velocity)

        self._effort = np.array(
            [j.limits.effort if j.limits and j.limits.effort is not None else np.inf
             for j in model._dof_joints])
        self._units = tuple("m" if j.kind == PRISMATIC else "rad"
                            for j in model._dof_joints)
        self._config = neutral_configuration(model)
        self._velocity = zero_velocity(model)
        self._time = 0.0
        self._modes = [ControlMode.TORQUE] * model.dof_count
        self._references = np.zeros(model.dof_count)
        self._applied = np.zeros(model.dof_count)
        self._wrenches = []  # [frame, Wrench, remaining seconds]
        self._rng = np.random.default_rng(noise_seed)
        self._encoder_cache = None
        self._closed = False

    # --- direct state access ---------------------------------------------------

    @property
    def time(self) -> float:
        return self._time

    @property
    def configuration(self) -> RobotConfiguration:
        return self._config

    @property
    def velocity(self) -> RobotVelocity:
        return self._velocity

    @property
    def state(self) -> SimState:
        return SimState(configuration=self._config, velocity=self._velocity,
                        time=self._time, modes=tuple(self._modes),
                        references=self._references.copy(),
                        applied_torques=self._applied.copy(),
                        contacts=tuple((f, w) for f, w, _ in self._wrenches))

    def close(self):
        self._closed = True

    # --- backend contract --------------------------------------------------------

    @property
    def available(self) -> bool:
        return not self._closed

    def joint_names(self) -> tuple:
        return self.model.joint_names

    def read_sensor(self, kind: SensorKind) -> SensorReading:
        kind = SensorKind(kind)
        if kind is not SensorKind.ENCODER:
            raise NoSuchSensor(kind)
        if self._encoder_cache is None or self._encoder_cache[0] != self._time:
            values = self._config.joint_positions.copy()
            if self.noise_std > 0.0:
                values += self._rng.normal(0.0, self.noise_std, values.shape)
            self._encoder_cache = (self._time, values)
        return SensorReading(kind=kind, values=self._encoder_cache[1].copy(),
                             units=self._units, timestamp=self._time)

    def native_estimate(self, kind: EstimateKind):
        if kind is EstimateKind.JOINT_VELOCITY and self.native_velocity:
            return self._velocity.joint_velocities.copy()
        return None

    def base_pose(self) -> Transform:
        return self._config.base_transform()

    def base_velocity(self) -> np.ndarray:
        return np.concatenate([self._velocity.base_linear,
                               self._velocity.base_angular])

    def set_control_mode(self, indices, mode: ControlMode) -> None:
        mode = ControlMode(mode)
        for i in np.atleast_1d(np.asarray(indices, dtype=int)):
            self._modes[i] = mode

    def set_references(self, indices, values) -> None:
        indices = np.atleast_1d(np.asarray(indices, dtype=int))
        values = np.atleast_1d(np.asarray(values, dtype=float))
        self._references[indices] = values

    # --- plant ---------------------------------------------------------------------

    def _assemble_torques(self) -> np.ndarray:
        q = self._config.joint_positions
        qd = self._velocity.joint_velocities
        tau = np.empty(self.model.dof_count)
        for i, mode in enumerate(self._modes):
            if mode is ControlMode.TORQUE:
                tau[i] = self._references[i]
            elif mode is ControlMode.POSITION:
                tau[i] = (self.gains.kp[i] * (self._references[i] - q[i])
                          - self.gains.kd[i] * qd[i])
            else:
                tau[i] = self.gains.kv[i] * (self._references[i] - qd[i])
        return np.clip(tau, -self._effort, self._effort)

    def step(self, dt: float | None = None) -> SimState:
        """Advance the plant by one step and return the new state."""
        dt = self.dt if dt is None else float(dt)
        if not 0.0 < dt <= MAX_STEP:
            raise ValueError(f"dt must be in (0, {MAX_STEP}], got {dt}")
        tau = self._assemble_torques()
        contacts = [(frame, wrench) for frame, wrench, _ in self._wrenches]
        nu_dot = forward_dynamics(self.model, self._config, self._velocity, tau,
                                  gravity=self.gravity, contacts=contacts)
        nu = self._velocity.to_generalized(self.model.floating) + dt * nu_dot
        self._velocity = RobotVelocity.from_generalized(nu, self.model.floating)
        self._config = integrate_configuration(self.model, self._config,
                                               self._velocity, dt)
        self._wrenches = [[f, w, r - dt] for f, w, r in self._wrenches if r - dt > 1e-12]
        self._time += dt
        self._applied = tau
        self._encoder_cache = None
        return self.state

    def apply_external_wrench(self, frame: str, wrench: Wrench,
                              duration: float) -> None:
        """Apply a world-frame wrench at the frame origin for ``duration``
        seconds (rounded up to whole steps)."""
        if not self.model.has_frame(frame):
            raise UnknownFrame(frame)
        if not isinstance(wrench, Wrench):
            wrench = Wrench.from_array(np.asarray(wrench, dtype=float))
        if duration > 0.0:
            self._wrenches.append([frame, wrench, float(duration)])

    def reset(self, configuration: RobotConfiguration,
              velocity: RobotVelocity | None = None) -> None:
        """Set the plant state and restart time at zero."""
        check_dimensions(self.model, configuration, velocity)
        check_rotation(configuration.base_rotation)
        self._config = configuration
        self._velocity = velocity if velocity is not None else zero_velocity(self.model)
        self._time = 0.0
        self._wrenches = []
        self._references = np.zeros(self.model.dof_count)
        self._applied = np.zeros(self.model.dof_count)
        self._encoder_cache = None
        self._rng = np.random.default_rng(self._seed)


class TrajectoryLog:
    """CSV trajectory writer.

    Columns: ``time``, then for floating models the base pose (position and
    wxyz quaternion) and base twist, then ``<joint>_pos, <joint>_vel,
    <joint>_tau`` per logged joint. One row per ``decimation`` steps.
    """

    BASE_COLUMNS = ("base_x", "base_y", "base_z", "base_qw", "base_qx",
                    "base_qy", "base_qz", "base_vx", "base_vy", "base_vz",
                    "base_wx", "base_wy", "base_wz")

    def __init__(self, path, joint_names, floating: bool = False,
                 decimation: int = 1):
        if decimation < 1:
            raise ValueError("decimation must be >= 1")
        self.joint_names = tuple(joint_names)
        self.floating = floating
        self.decimation = int(decimation)
        self._count = 0
        self._file = open(path, "w", newline="")
        self._writer = csv.writer(self._file)
        header = ["time"]
        if floating:
            header.extend(self.BASE_COLUMNS)
        for name in self.joint_names:
            header.extend([f"{name}_pos", f"{name}_vel", f"{name}_tau"])
        self._writer.writerow(header)

    def record(self, time, positions, velocities, torques,
               base_pose: Transform | None = None, base_velocity=None) -> None:
        self._count += 1
        if (self._count - 1) % self.decimation != 0:
            return
        row = [repr(float(time))]
        if self.floating:
            quat = rotation_to_quaternion(base_pose.rotation)
            row.extend(repr(float(v)) for v in base_pose.translation)
            row.extend(repr(float(v)) for v in quat)
            row.extend(repr(float(v)) for v in np.asarray(base_velocity, dtype=float))
        for p, v, t in zip(positions, velocities, torques):
            row.extend([repr(float(p)), repr(float(v)), repr(float(t))])
        self._writer.writerow(row)

    def close(self):
        self._file.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()
