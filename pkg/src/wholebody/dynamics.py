"""Rigid-body dynamics over a kinematic tree.

Equations of motion solved here, with q the configuration and nu the
generalized velocity:

    M(q) nu_dot + C(q, nu) nu + G(q) = B tau + sum_k J_k(q)^T f_k

Generalized vectors are laid out base-linear (3), base-angular (3), then
joint entries in canonical order; fixed-base models drop the 6 base rows.
The velocity convention is "mixed": the base linear velocity is the
inertial-frame derivative of the base position and the angular velocity
omega satisfies R_dot = skew(omega) R. Frame Jacobians use the same
convention, rows ordered linear then angular.

The mass matrix comes from composite-rigid-body aggregation, inverse
dynamics and bias terms from a recursive Newton-Euler pass over world
frame quantities, and forward dynamics from a dense symmetric solve. The
Coriolis matrix is never materialized, only the product C(q, nu) nu is
available. External contact wrenches are inputs, expressed in
inertial-frame coordinates and applied at the origin of the contact frame.
"""
from __future__ import annotations

import math

import numpy as np

from .errors import DimensionMismatch, SingularMassMatrix, UnknownFrame
from .model import (FIXED, PRISMATIC, REVOLUTE, MultibodyModel,
                    RobotConfiguration, RobotVelocity, check_dimensions)
from .spatial import Transform, Wrench, exp_so3, skew

GRAVITY = np.array([0.0, 0.0, -9.81])

_EYE3 = np.eye(3)


def _cross(a, b) -> np.ndarray:
    # np.cross has far too much shape machinery for single 3-vectors
    return np.array((a[1] * b[2] - a[2] * b[1],
                     a[2] * b[0] - a[0] * b[2],
                     a[0] * b[1] - a[1] * b[0]))


class _TreeState:
    """World-frame kinematics of every link at one configuration.

    Arrays are indexed by link position in ``model.links``. ``dof_axis`` /
    ``dof_point`` give, for each moving joint, its world axis and a world
    point on that axis (the joint anchor); together with ``dof_kind`` they
    describe the velocity field each degree of freedom generates.
    """

    def __init__(self, model: MultibodyModel, config: RobotConfiguration):
        check_dimensions(model, config)
        n_links = len(model.links)
        self.model = model
        self.R = [None] * n_links
        self.p = [None] * n_links
        self.com = [None] * n_links
        self.inertia = [None] * n_links

        n = model.dof_count
        self.dof_kind = [None] * n
        self.dof_axis = [None] * n
        self.dof_point = [None] * n

        base = model._link_index[model.base_link]
        self.base_index = base
        self.R[base] = np.asarray(config.base_rotation, dtype=float)
        self.p[base] = np.asarray(config.base_position, dtype=float)

        q = config.joint_positions
        for ji in range(len(model.joints)):
            pi = model._j_parent[ji]
            ci = model._j_child[ji]
            r_parent = self.R[pi]
            r_jf = r_parent @ model._j_orot[ji]
            p_jf = self.p[pi] + r_parent @ model._j_otr[ji]
            kind = model._j_kind[ji]
            dof = model._joint_dof[ji]
            if kind == REVOLUTE:
                angle = q[dof]
                c, s = math.cos(angle), math.sin(angle)
                local = c * _EYE3 + s * model._j_askew[ji] + (1.0 - c) * model._j_aouter[ji]
                self.R[ci] = r_jf @ local
                self.p[ci] = p_jf
                self.dof_kind[dof] = REVOLUTE
                self.dof_axis[dof] = r_jf @ model._j_axis[ji]
                self.dof_point[dof] = p_jf
            elif kind == PRISMATIC:
                axis_w = r_jf @ model._j_axis[ji]
                self.R[ci] = r_jf
                self.p[ci] = p_jf + axis_w * q[dof]
                self.dof_kind[dof] = PRISMATIC
                self.dof_axis[dof] = axis_w
                self.dof_point[dof] = p_jf
            else:
                self.R[ci] = r_jf
                self.p[ci] = p_jf

        for li in range(n_links):
            r = self.R[li]
            self.com[li] = self.p[li] + r @ model._l_com[li]
            self.inertia[li] = r @ model._l_inertia[li] @ r.T

    def frame_index(self, frame: str) -> int:
        try:
            return self.model._link_index[frame]
        except KeyError:
            raise UnknownFrame(frame) from None


def _as_accel(model: MultibodyModel, accel) -> np.ndarray:
    a = np.asarray(accel, dtype=float)
    if a.shape != (model.velocity_dim,):
        raise DimensionMismatch(
            f"acceleration has shape {a.shape}, expected ({model.velocity_dim},)")
    return a


# --- kinematics ---------------------------------------------------------------

def forward_kinematics(model: MultibodyModel, config: RobotConfiguration
                       ) -> dict[str, Transform]:
    """World pose of every link frame."""
    tree = _TreeState(model, config)
    return {link.name: Transform(tree.R[i], tree.p[i])
            for i, link in enumerate(model.links)}


def _jacobian(tree: _TreeState, frame: str) -> np.ndarray:
    model = tree.model
    fi = tree.frame_index(frame)
    p_f = tree.p[fi]
    dim = model.velocity_dim
    jac = np.zeros((6, dim))
    offset = 0
    if model.floating:
        p_b = tree.p[tree.base_index]
        jac[0:3, 0:3] = _EYE3
        jac[0:3, 3:6] = -skew(p_f - p_b)
        jac[3:6, 3:6] = _EYE3
        offset = 6
    for dof in model.dof_path(model.links[fi].name):
        axis = tree.dof_axis[dof]
        if tree.dof_kind[dof] == REVOLUTE:
            jac[0:3, offset + dof] = _cross(axis, p_f - tree.dof_point[dof])
            jac[3:6, offset + dof] = axis
        else:
            jac[0:3, offset + dof] = axis
    return jac


def frame_jacobian(model: MultibodyModel, config: RobotConfiguration,
                   frame: str) -> np.ndarray:
    """6 x dim matrix mapping generalized velocity to the frame twist
    (linear rows first). Columns of joints that do not move the frame are zero."""
    return _jacobian(_TreeState(model, config), frame)


# --- mass matrix --------------------------------------------------------------

def _composites(tree: _TreeState):
    """Per-link composite mass, com and inertia (about the composite com,
    world axes) of the subtree rooted at that link."""
    model = tree.model
    n_links = len(model.links)
    mass = [model._l_mass[i] for i in range(n_links)]
    com = [tree.com[i] for i in range(n_links)]
    inertia = [tree.inertia[i] for i in range(n_links)]

    def shift(inr, m, d):
        # inertia about a point displaced by d from the com
        return inr + m * (float(d @ d) * _EYE3 - np.outer(d, d))

    for ji in range(len(model.joints) - 1, -1, -1):
        ci = model._j_child[ji]
        pi = model._j_parent[ji]
        m_total = mass[pi] + mass[ci]
        if m_total > 0.0:
            c_total = (mass[pi] * com[pi] + mass[ci] * com[ci]) / m_total
        else:
            c_total = tree.p[pi]
        inertia[pi] = (shift(inertia[pi], mass[pi], com[pi] - c_total)
                       + shift(inertia[ci], mass[ci], com[ci] - c_total))
        mass[pi] = m_total
        com[pi] = c_total
    return mass, com, inertia


def _generators(tree: _TreeState):
    """(kind, axis, point) of every generalized coordinate, base first."""
    model = tree.model
    gens = []
    if model.floating:
        p_b = tree.p[tree.base_index]
        gens.extend((PRISMATIC, _EYE3[k], p_b) for k in range(3))
        gens.extend((REVOLUTE, _EYE3[k], p_b) for k in range(3))
    gens.extend(zip(tree.dof_kind, tree.dof_axis, tree.dof_point))
    return gens


def mass_matrix(model: MultibodyModel, config: RobotConfiguration) -> np.ndarray:
    """Symmetric positive-definite matrix of the kinetic-energy form,
    built by composite-rigid-body aggregation."""
    return _mass_matrix(_TreeState(model, config))


def _mass_matrix(tree: _TreeState) -> np.ndarray:
    model = tree.model
    mass, com, inertia = _composites(tree)
    gens = _generators(tree)
    dim = model.velocity_dim
    offset = 6 if model.floating else 0
    m_out = np.zeros((dim, dim))
    dof_to_joint = [ji for ji, kind in enumerate(model._j_kind) if kind != FIXED]

    def column_ancestors(k):
        # generalized coordinates whose motion reaches coordinate k's subtree
        if k < offset:
            return range(k + 1)
        child = model.links[model._j_child[dof_to_joint[k - offset]]].name
        return list(range(offset)) + [offset + d for d in model.dof_path(child)]

    for k in range(dim):
        if k < offset:
            sub = tree.base_index
        else:
            sub = model._j_child[dof_to_joint[k - offset]]
        m_c, c_c, i_c = mass[sub], com[sub], inertia[sub]
        kind_k, axis_k, point_k = gens[k]
        if kind_k == REVOLUTE:
            force = m_c * _cross(axis_k, c_c - point_k)
            couple = i_c @ axis_k
        else:
            force = m_c * axis_k
            couple = None
        for j in column_ancestors(k):
            kind_j, axis_j, point_j = gens[j]
            if kind_j == REVOLUTE:
                value = force @ _cross(axis_j, c_c - point_j)
                if couple is not None:
                    value += couple @ axis_j
            else:
                value = force @ axis_j
            m_out[j, k] = value
            m_out[k, j] = value
    return m_out


# --- inverse dynamics ---------------------------------------------------------

def _rnea(tree: _TreeState, velocity: RobotVelocity, accel: np.ndarray,
          gravity: np.ndarray) -> np.ndarray:
    """Generalized force for the requested acceleration, no contact terms.

    Newton-Euler in world coordinates: propagate velocities and
    accelerations from the base out, accumulate link wrenches from the
    leaves in. Gravity enters as a fictitious base acceleration so every
    link weight is picked up by the same pass.
    """
    model = tree.model
    n_links = len(model.links)
    omega = [None] * n_links
    alpha = [None] * n_links
    acc = [None] * n_links
    vel = [None] * n_links

    base = tree.base_index
    if model.floating:
        vel[base] = velocity.base_linear
        omega[base] = velocity.base_angular
        acc[base] = accel[0:3] - gravity
        alpha[base] = accel[3:6]
        qdd = accel[6:]
    else:
        vel[base] = np.zeros(3)
        omega[base] = np.zeros(3)
        acc[base] = -gravity
        alpha[base] = np.zeros(3)
        qdd = accel
    qd = velocity.joint_velocities

    n_joints = len(model.joints)
    for ji in range(n_joints):
        pi = model._j_parent[ji]
        ci = model._j_child[ji]
        r = tree.p[ci] - tree.p[pi]
        w_p = omega[pi]
        a_p = alpha[pi]
        v_anchor = vel[pi] + _cross(w_p, r)
        acc_anchor = acc[pi] + _cross(a_p, r) + _cross(w_p, _cross(w_p, r))
        kind = model._j_kind[ji]
        dof = model._joint_dof[ji]
        if kind == REVOLUTE:
            axis = tree.dof_axis[dof]
            omega[ci] = w_p + axis * qd[dof]
            vel[ci] = v_anchor
            alpha[ci] = a_p + axis * qdd[dof] + _cross(w_p, axis) * qd[dof]
            acc[ci] = acc_anchor
        elif kind == PRISMATIC:
            axis = tree.dof_axis[dof]
            omega[ci] = w_p
            vel[ci] = v_anchor + axis * qd[dof]
            alpha[ci] = a_p
            acc[ci] = (acc_anchor + axis * qdd[dof]
                       + 2.0 * _cross(w_p, axis * qd[dof]))
        else:
            omega[ci] = w_p
            vel[ci] = v_anchor
            alpha[ci] = a_p
            acc[ci] = acc_anchor

    # net force / moment-about-link-origin that each link's parent joint
    # must transmit, accumulated leaves-in
    force = [None] * n_links
    moment = [None] * n_links
    for li in range(n_links):
        m = model._l_mass[li]
        arm = tree.com[li] - tree.p[li]
        w = omega[li]
        acc_com = acc[li] + _cross(alpha[li], arm) + _cross(w, _cross(w, arm))
        f = m * acc_com
        i_w = tree.inertia[li]
        force[li] = f
        moment[li] = i_w @ alpha[li] + _cross(w, i_w @ w) + _cross(arm, f)

    out = np.zeros(model.velocity_dim)
    offset = 6 if model.floating else 0
    for ji in range(n_joints - 1, -1, -1):
        pi = model._j_parent[ji]
        ci = model._j_child[ji]
        kind = model._j_kind[ji]
        dof = model._joint_dof[ji]
        if kind == REVOLUTE:
            out[offset + dof] = tree.dof_axis[dof] @ moment[ci]
        elif kind == PRISMATIC:
            out[offset + dof] = tree.dof_axis[dof] @ force[ci]
        force[pi] = force[pi] + force[ci]
        moment[pi] = moment[pi] + moment[ci] + _cross(tree.p[ci] - tree.p[pi],
                                                      force[ci])
    if model.floating:
        out[0:3] = force[base]
        out[3:6] = moment[base]
    return out


def _contact_forces(tree: _TreeState, contacts) -> np.ndarray:
    """sum_k J_k^T f_k for wrenches applied at contact-frame origins."""
    total = np.zeros(tree.model.velocity_dim)
    for frame, wrench in contacts:
        if isinstance(wrench, Wrench):
            wrench = wrench.to_array()
        else:
            wrench = np.asarray(wrench, dtype=float)
        total += _jacobian(tree, frame).T @ wrench
    return total


def inverse_dynamics(model: MultibodyModel, config: RobotConfiguration,
                     velocity: RobotVelocity, accel, gravity=GRAVITY,
                     contacts=None) -> np.ndarray:
    """Generalized force M(q) a + C(q, nu) nu + G(q) - sum_k J_k^T f_k."""
    check_dimensions(model, config, velocity)
    tree = _TreeState(model, config)
    out = _rnea(tree, velocity, _as_accel(model, accel),
                np.asarray(gravity, dtype=float))
    if contacts:
        out -= _contact_forces(tree, contacts)
    return out


def bias_forces(model: MultibodyModel, config: RobotConfiguration,
                velocity: RobotVelocity, gravity=GRAVITY) -> np.ndarray:
    """Velocity and gravity terms C(q, nu) nu + G(q)."""
    check_dimensions(model, config, velocity)
    tree = _TreeState(model, config)
    return _rnea(tree, velocity, np.zeros(model.velocity_dim),
                 np.asarray(gravity, dtype=float))


def gravity_bias(model: MultibodyModel, config: RobotConfiguration,
                 gravity=GRAVITY) -> np.ndarray:
    """G(q): generalized force holding the robot still under gravity."""
    check_dimensions(model, config)
    tree = _TreeState(model, config)
    zero = RobotVelocity(np.zeros(3), np.zeros(3), np.zeros(model.dof_count))
    return _rnea(tree, zero, np.zeros(model.velocity_dim),
                 np.asarray(gravity, dtype=float))


# --- forward dynamics ----------------------------------------------------------

def _solve_spd(m: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    try:
        factor = np.linalg.cholesky(m)
    except np.linalg.LinAlgError as e:
        raise SingularMassMatrix(f"mass matrix is not positive definite: {e}") from e
    diag = np.diag(factor)
    if diag.min() <= 0.0 or (diag.max() / diag.min()) ** 2 > 1e12:
        raise SingularMassMatrix("mass matrix conditioning beyond 1e12")
    return np.linalg.solve(m, rhs)


def forward_dynamics(model: MultibodyModel, config: RobotConfiguration,
                     velocity: RobotVelocity, torques, gravity=GRAVITY,
                     contacts=None) -> np.ndarray:
    """Generalized acceleration from joint torques and contact wrenches.

    The actuation selector places torques in the joint rows only; the six
    base rows of a floating model are unactuated.
    """
    check_dimensions(model, config, velocity)
    tau = np.asarray(torques, dtype=float)
    if tau.shape != (model.dof_count,):
        raise DimensionMismatch(
            f"torques have shape {tau.shape}, expected ({model.dof_count},)")
    tree = _TreeState(model, config)
    gravity = np.asarray(gravity, dtype=float)
    rhs = -_rnea(tree, velocity, np.zeros(model.velocity_dim), gravity)
    if model.floating:
        rhs[6:] += tau
    else:
        rhs += tau
    if contacts:
        rhs += _contact_forces(tree, contacts)
    return _solve_spd(_mass_matrix(tree), rhs)


# --- energy / momentum helpers --------------------------------------------------

def kinetic_energy(model: MultibodyModel, config: RobotConfiguration,
                   velocity: RobotVelocity) -> float:
    nu = velocity.to_generalized(model.floating)
    return 0.5 * float(nu @ mass_matrix(model, config) @ nu)


def potential_energy(model: MultibodyModel, config: RobotConfiguration,
                     gravity=GRAVITY) -> float:
    tree = _TreeState(model, config)
    gravity = np.asarray(gravity, dtype=float)
    return -float(sum(model._l_mass[i] * (gravity @ tree.com[i])
                      for i in range(len(model.links))))


def center_of_mass(model: MultibodyModel, config: RobotConfiguration) -> np.ndarray:
    tree = _TreeState(model, config)
    total = model.total_mass
    if total == 0.0:
        return tree.p[tree.base_index].copy()
    return sum(model._l_mass[i] * tree.com[i]
               for i in range(len(model.links))) / total


def spatial_momentum(model: MultibodyModel, config: RobotConfiguration,
                     velocity: RobotVelocity) -> np.ndarray:
    """Total linear momentum and angular momentum about the center of mass.

    Taken from the base rows of M(q) nu, which pair with the base
    coordinates (moment about the base origin), then shifted to the com
    where the quantity is conserved for an unforced free-floating system.
    """
    if not model.floating:
        raise ValueError("spatial momentum is defined for floating-base models")
    check_dimensions(model, config, velocity)
    nu = velocity.to_generalized(True)
    h = (mass_matrix(model, config) @ nu)[0:6]
    lin = h[0:3]
    ang = h[3:6] - np.cross(center_of_mass(model, config) - config.base_position, lin)
    return np.concatenate([lin, ang])


# --- configuration integration ---------------------------------------------------

def _renormalize_rotation(r: np.ndarray) -> np.ndarray:
    # first-order orthonormality correction; quadratically accurate for the
    # near-orthonormal matrices the integrator produces
    return 1.5 * r - 0.5 * (r @ r.T @ r)


def integrate_configuration(model: MultibodyModel, config: RobotConfiguration,
                            velocity: RobotVelocity, dt: float) -> RobotConfiguration:
    """Advance positions by ``dt`` at constant velocity; the base rotation
    is updated on the rotation group and re-orthonormalized."""
    check_dimensions(model, config, velocity)
    joints = config.joint_positions + dt * velocity.joint_velocities
    if not model.floating:
        return RobotConfiguration(config.base_position, config.base_rotation, joints)
    pos = config.base_position + dt * velocity.base_linear
    rot = _renormalize_rotation(exp_so3(velocity.base_angular, dt)
                                @ config.base_rotation)
    return RobotConfiguration(pos, rot, joints)
