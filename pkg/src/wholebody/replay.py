"""Replay backend: feeds previously recorded signals to a controller.

Useful for desk-checking a controller against logged data and for showing
backend independence: the same controller code that ran against a live
backend reproduces its output exactly when driven by the recording.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NoSuchSensor
from .interface import (ControlMode, EstimateKind, RobotBackend, SensorKind,
                        SensorReading)


@dataclass(frozen=True)
class ReplaySample:
    """One recorded instant: joint positions and optional derivatives,
    all in the recorded backend's joint order."""

    time: float
    positions: np.ndarray
    velocities: np.ndarray | None = None
    accelerations: np.ndarray | None = None

    def __post_init__(self):
        object.__setattr__(self, "positions",
                           np.atleast_1d(np.asarray(self.positions, dtype=float)))
        for name in ("velocities", "accelerations"):
            value = getattr(self, name)
            if value is not None:
                object.__setattr__(self, name,
                                   np.atleast_1d(np.asarray(value, dtype=float)))


class ReplayBackend(RobotBackend):
    """Plays back a sample sequence; commands are recorded, not actuated.

    Only torque mode is supported since references go nowhere. Sent
    references are appended to ``commands`` as (time, backend-order vector)
    so tests can compare reference streams.
    """

    def __init__(self, joint_names, samples):
        self._names = tuple(joint_names)
        self._samples = list(samples)
        if not self._samples:
            raise ValueError("replay needs at least one sample")
        for s in self._samples:
            if s.positions.shape != (len(self._names),):
                raise ValueError("sample size does not match joint names")
        self._cursor = 0
        self._references = np.zeros(len(self._names))
        self.commands = []

    @property
    def current(self) -> ReplaySample:
        return self._samples[self._cursor]

    @property
    def exhausted(self) -> bool:
        return self._cursor >= len(self._samples) - 1

    def advance(self) -> bool:
        """Move to the next sample; False once the recording ran out."""
        if self.exhausted:
            return False
        self._cursor += 1
        return True

    # --- backend contract ------------------------------------------------------

    def joint_names(self) -> tuple:
        return self._names

    def supported_modes(self) -> frozenset:
        return frozenset({ControlMode.TORQUE})

    def read_sensor(self, kind: SensorKind) -> SensorReading:
        kind = SensorKind(kind)
        if kind is not SensorKind.ENCODER:
            raise NoSuchSensor(kind)
        sample = self.current
        return SensorReading(kind=kind, values=sample.positions.copy(),
                             units=("rad",) * len(self._names),
                             timestamp=sample.time)

    def native_estimate(self, kind: EstimateKind):
        sample = self.current
        if kind is EstimateKind.JOINT_VELOCITY and sample.velocities is not None:
            return sample.velocities.copy()
        if (kind is EstimateKind.JOINT_ACCELERATION
                and sample.accelerations is not None):
            return sample.accelerations.copy()
        return None

    def set_control_mode(self, indices, mode: ControlMode) -> None:
        pass  # mode validity is checked by the interface

    def set_references(self, indices, values) -> None:
        indices = np.atleast_1d(np.asarray(indices, dtype=int))
        values = np.atleast_1d(np.asarray(values, dtype=float))
        self._references[indices] = values
        self.commands.append((self.current.time, self._references.copy()))
