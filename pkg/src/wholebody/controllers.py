"""Reference controllers written purely against the whole-body interface.

Each step function does one read-compute-write pass and owns no timing;
scheduling belongs to the harness. Only interface calls are used, so the
same controller runs against any backend.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, FixedBaseRequired
from .interface import EstimateKind, WholeBodyInterface


@dataclass(frozen=True)
class PdGravityGains:
    """Diagonal PD gains and joint setpoint, in controller order.

    Gains must be strictly positive; that is what makes the closed loop
    provably stable around the setpoint.
    """

    kp: np.ndarray
    kd: np.ndarray
    setpoint: np.ndarray

    def __post_init__(self):
        kp = np.atleast_1d(np.asarray(self.kp, dtype=float))
        kd = np.atleast_1d(np.asarray(self.kd, dtype=float))
        sp = np.atleast_1d(np.asarray(self.setpoint, dtype=float))
        if kp.shape != kd.shape or kp.shape != sp.shape:
            raise DimensionMismatch("kp, kd and setpoint must have equal length")
        if np.any(kp <= 0.0) or np.any(kd <= 0.0):
            raise ValueError("PD gains must be strictly positive")
        object.__setattr__(self, "kp", kp)
        object.__setattr__(self, "kd", kd)
        object.__setattr__(self, "setpoint", sp)


def _require_fixed_base(interface: WholeBodyInterface):
    if interface.floating:
        raise FixedBaseRequired(
            "this controller is defined for fixed-base robots only")


def _joint_gravity_torques(interface: WholeBodyInterface,
                           positions: np.ndarray) -> np.ndarray:
    return interface.model.gravity_bias(positions)


def gravity_compensation_step(interface: WholeBodyInterface) -> np.ndarray:
    """Send the torque that exactly cancels gravity at the measured posture.

    A plant starting at rest stays at rest under this feedforward.
    """
    _require_fixed_base(interface)
    q = interface.state.get_estimates(EstimateKind.JOINT_POSITION)
    tau = _joint_gravity_torques(interface, q)
    interface.actuators.set_control_reference(tau)
    return tau


def pd_gravity_step(interface: WholeBodyInterface,
                    gains: PdGravityGains) -> np.ndarray:
    """One pass of PD feedback about the setpoint plus gravity feedforward.

    tau = gravity(q) - kp * (q - setpoint) - kd * qd, sent as a torque
    reference; the joints must already be in torque mode.
    """
    _require_fixed_base(interface)
    if gains.kp.shape != (interface.dofs,):
        raise DimensionMismatch(
            f"gains sized {gains.kp.shape}, interface has {interface.dofs} dofs")
    q = interface.state.get_estimates(EstimateKind.JOINT_POSITION)
    qd = interface.state.get_estimates(EstimateKind.JOINT_VELOCITY)
    tau = (_joint_gravity_torques(interface, q)
           - gains.kp * (q - gains.setpoint) - gains.kd * qd)
    interface.actuators.set_control_reference(tau)
    return tau
