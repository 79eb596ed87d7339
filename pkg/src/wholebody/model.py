"""Kinematic tree of rigid links and 1-DoF joints, loaded from URDF.

The supported URDF subset is ``<robot>``, ``<link><inertial>`` and
``<joint type="revolute|continuous|prismatic|fixed">`` with ``<origin>``,
``<axis>`` and ``<limit>``. Visual, collision, mesh and transmission
elements are ignored. ``continuous`` joints are treated as revolute
joints without position limits. ``rpy`` attributes are fixed-axis X-Y-Z
rotations applied in that order.

Joint ordering is canonical and fixed at construction time: depth-first
from the base link, visiting children in document order, fixed joints
excluded from the degree-of-freedom count.
"""
from __future__ import annotations

import math
import os
import xml.etree.ElementTree as ET
from dataclasses import dataclass

import numpy as np

from .errors import (DimensionMismatch, InvalidInertia, InvalidUrdf, MalformedXml,
                     MissingInertial, ModelLoadError, NonTreeTopology,
                     UnsupportedJointType)
from .spatial import Transform, _vec3, exp_so3, skew

REVOLUTE = "revolute"
PRISMATIC = "prismatic"
FIXED = "fixed"

_INERTIA_SYM_TOL = 1e-12
_INERTIA_TRIANGLE_TOL = 1e-9


def rotation_from_rpy(rpy) -> np.ndarray:
    """Fixed-axis X-Y-Z rotation: Rz(yaw) @ Ry(pitch) @ Rx(roll)."""
    roll, pitch, yaw = [float(v) for v in rpy]
    rx = exp_so3(np.array([1.0, 0.0, 0.0]), roll)
    ry = exp_so3(np.array([0.0, 1.0, 0.0]), pitch)
    rz = exp_so3(np.array([0.0, 0.0, 1.0]), yaw)
    return rz @ ry @ rx


def rpy_from_rotation(r) -> tuple[float, float, float]:
    """Inverse of :func:`rotation_from_rpy` (gimbal-degenerate poses pick yaw=0)."""
    r = np.asarray(r, dtype=float)
    sy = math.hypot(r[0, 0], r[1, 0])
    if sy < 1e-12:
        return math.atan2(-r[1, 2], r[1, 1]), math.atan2(-r[2, 0], sy), 0.0
    return (math.atan2(r[2, 1], r[2, 2]),
            math.atan2(-r[2, 0], sy),
            math.atan2(r[1, 0], r[0, 0]))


@dataclass(frozen=True)
class JointLimits:
    lower: float | None = None
    upper: float | None = None
    effort: float | None = None

    def __post_init__(self):
        if self.lower is not None and self.upper is not None and self.lower > self.upper:
            raise InvalidUrdf(f"limit lower {self.lower} > upper {self.upper}")


@dataclass(frozen=True)
class LinkSpec:
    """Rigid link: mass, center of mass and rotational inertia in the link frame.

    ``inertia`` is taken about the center of mass, expressed in link-frame
    axes. It must be symmetric, positive semi-definite and satisfy the
    triangle inequality on its principal moments.
    """

    name: str
    mass: float
    com: np.ndarray
    inertia: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "com", _vec3(self.com))
        inertia = np.asarray(self.inertia, dtype=float)
        if inertia.shape != (3, 3):
            raise InvalidInertia(self.name, "inertia must be a 3x3 matrix")
        object.__setattr__(self, "inertia", inertia)
        if not math.isfinite(self.mass) or self.mass < 0.0:
            raise InvalidInertia(self.name, f"mass must be finite and >= 0, got {self.mass}")
        if not np.all(np.isfinite(inertia)):
            raise InvalidInertia(self.name, "inertia has non-finite entries")
        if np.max(np.abs(inertia - inertia.T)) > _INERTIA_SYM_TOL:
            raise InvalidInertia(self.name, "inertia is not symmetric")
        moments = np.linalg.eigvalsh(inertia)
        scale = max(1.0, float(moments[-1]))
        if moments[0] < -1e-12 * scale:
            raise InvalidInertia(self.name, "inertia is not positive semi-definite")
        a, b, c = moments
        if a + b < c - _INERTIA_TRIANGLE_TOL:
            raise InvalidInertia(self.name, "principal moments violate the triangle inequality")


@dataclass(frozen=True)
class JointSpec:
    """1-DoF joint. ``origin`` maps the joint frame into the parent link frame;
    ``axis`` is a unit vector in the joint (child link) frame, None for fixed
    joints."""

    name: str
    kind: str
    parent: str
    child: str
    origin: Transform
    axis: np.ndarray | None = None
    limits: JointLimits | None = None

    def __post_init__(self):
        if self.kind not in (REVOLUTE, PRISMATIC, FIXED):
            raise UnsupportedJointType(self.name, self.kind)
        if self.kind == FIXED:
            object.__setattr__(self, "axis", None)
            return
        if self.axis is None:
            raise InvalidUrdf(f"joint '{self.name}': non-fixed joint needs an axis")
        axis = _vec3(self.axis)
        norm = float(np.linalg.norm(axis))
        if norm < 1e-9:
            raise InvalidUrdf(f"joint '{self.name}': axis has zero length")
        object.__setattr__(self, "axis", axis / norm)


class MultibodyModel:
    """Immutable kinematic tree rooted at a single base link.

    ``joints`` holds every joint (fixed included) in canonical depth-first
    order; ``dof_count`` counts the non-fixed ones. ``floating`` selects
    whether the base pose is a state (6 extra degrees of freedom) or a
    constant mounting pose.
    """

    def __init__(self, name: str, links, joints, floating: bool = False):
        self.name = name
        self.links = tuple(links)
        self.floating = bool(floating)

        self._link_index = {}
        for i, link in enumerate(self.links):
            if link.name in self._link_index:
                raise InvalidUrdf(f"duplicate link name '{link.name}'")
            self._link_index[link.name] = i

        seen = set()
        parent_of = {}
        for joint in joints:
            if joint.name in seen:
                raise InvalidUrdf(f"duplicate joint name '{joint.name}'")
            seen.add(joint.name)
            for end in (joint.parent, joint.child):
                if end not in self._link_index:
                    raise InvalidUrdf(f"joint '{joint.name}' references unknown link '{end}'")
            if joint.child in parent_of:
                raise NonTreeTopology(
                    f"link '{joint.child}' is the child of more than one joint")
            parent_of[joint.child] = joint

        roots = [l.name for l in self.links if l.name not in parent_of]
        if len(roots) != 1:
            raise NonTreeTopology(
                f"expected exactly one root link, found {roots or 'none (loop)'}")
        self.base_link = roots[0]

        children = {l.name: [] for l in self.links}
        for joint in joints:  # document order gives the child visit order
            children[joint.parent].append(joint)

        ordered = []  # depth-first, children in document order

        def visit(link):
            for joint in children[link]:
                ordered.append(joint)
                visit(joint.child)

        visit(self.base_link)
        if len(ordered) != len(list(joints)):
            unreachable = [j.name for j in joints if j not in ordered]
            raise NonTreeTopology(f"joints not reachable from the base: {unreachable}")
        self.joints = tuple(ordered)

        self._joint_index = {j.name: i for i, j in enumerate(self.joints)}
        self._dof_joints = tuple(j for j in self.joints if j.kind != FIXED)
        self._dof_index = {j.name: i for i, j in enumerate(self._dof_joints)}
        self.dof_count = len(self._dof_joints)

        # per-joint dof slot (-1 for fixed), per-link parent joint, dof path to base
        self._joint_dof = tuple(self._dof_index.get(j.name, -1) for j in self.joints)
        self._parent_joint = {j.child: i for i, j in enumerate(self.joints)}
        paths = {self.base_link: ()}
        for i, joint in enumerate(self.joints):
            path = paths[joint.parent]
            if joint.kind != FIXED:
                path = path + (self._joint_dof[i],)
            paths[joint.child] = path
        self._dof_path = paths

        self.warnings = tuple(
            f"link '{l.name}' has zero mass; selecting its joints can make "
            f"the mass matrix singular"
            for l in self.links if l.mass == 0.0)

        # flat per-joint/per-link arrays for the dynamics hot path
        self._j_parent = tuple(self._link_index[j.parent] for j in self.joints)
        self._j_child = tuple(self._link_index[j.child] for j in self.joints)
        self._j_kind = tuple(j.kind for j in self.joints)
        self._j_orot = tuple(j.origin.rotation for j in self.joints)
        self._j_otr = tuple(j.origin.translation for j in self.joints)
        self._j_axis = tuple(j.axis for j in self.joints)
        self._j_askew = tuple(None if j.axis is None else skew(j.axis)
                              for j in self.joints)
        self._j_aouter = tuple(None if j.axis is None else np.outer(j.axis, j.axis)
                               for j in self.joints)
        self._l_mass = tuple(l.mass for l in self.links)
        self._l_com = tuple(l.com for l in self.links)
        self._l_inertia = tuple(l.inertia for l in self.links)

    # --- lookups -------------------------------------------------------------

    def link(self, name: str) -> LinkSpec:
        return self.links[self._link_index[name]]

    def joint(self, name: str) -> JointSpec:
        return self.joints[self._joint_index[name]]

    def has_frame(self, name: str) -> bool:
        return name in self._link_index

    @property
    def frame_names(self) -> tuple[str, ...]:
        return tuple(l.name for l in self.links)

    @property
    def joint_names(self) -> tuple[str, ...]:
        return tuple(j.name for j in self._dof_joints)

    def dof_index(self, joint_name: str) -> int:
        return self._dof_index[joint_name]

    def dof_joint(self, dof: int) -> JointSpec:
        return self._dof_joints[dof]

    def dof_path(self, frame: str) -> tuple[int, ...]:
        """Indices of the moving joints on the chain from the base to ``frame``."""
        return self._dof_path[frame]

    @property
    def velocity_dim(self) -> int:
        return self.dof_count + 6 if self.floating else self.dof_count

    @property
    def total_mass(self) -> float:
        return float(sum(l.mass for l in self.links))


def canonical_joint_order(model: MultibodyModel) -> list[str]:
    """Names of the moving joints in canonical (depth-first, document) order."""
    return list(model.joint_names)


# --- configuration / velocity ------------------------------------------------

@dataclass(frozen=True)
class RobotConfiguration:
    """Base position, base rotation and joint positions.

    For fixed-base models the base fields describe the constant mounting
    pose of the base link in the world.
    """

    base_position: np.ndarray
    base_rotation: np.ndarray
    joint_positions: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "base_position", _vec3(self.base_position))
        rot = np.asarray(self.base_rotation, dtype=float)
        if rot.shape != (3, 3) or not math.isfinite(rot.sum()):
            raise ValueError("base_rotation must be a finite 3x3 matrix")
        object.__setattr__(self, "base_rotation", rot)
        jp = np.atleast_1d(np.asarray(self.joint_positions, dtype=float))
        if jp.ndim != 1 or not math.isfinite(jp.sum()):
            raise ValueError("joint_positions must be a finite 1-D array")
        object.__setattr__(self, "joint_positions", jp)

    def base_transform(self) -> Transform:
        return Transform(self.base_rotation, self.base_position)


@dataclass(frozen=True)
class RobotVelocity:
    """Base linear velocity, base angular velocity and joint rates.

    The linear part is the inertial-frame derivative of the base position;
    the angular part is the world angular velocity of the base frame.
    """

    base_linear: np.ndarray
    base_angular: np.ndarray
    joint_velocities: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "base_linear", _vec3(self.base_linear))
        object.__setattr__(self, "base_angular", _vec3(self.base_angular))
        jv = np.atleast_1d(np.asarray(self.joint_velocities, dtype=float))
        if jv.ndim != 1 or not math.isfinite(jv.sum()):
            raise ValueError("joint_velocities must be a finite 1-D array")
        object.__setattr__(self, "joint_velocities", jv)

    def to_generalized(self, floating: bool) -> np.ndarray:
        """Stacked (base linear, base angular, joint rates); joints only when fixed."""
        if floating:
            return np.concatenate([self.base_linear, self.base_angular,
                                   self.joint_velocities])
        return self.joint_velocities.copy()

    @classmethod
    def from_generalized(cls, nu, floating: bool) -> "RobotVelocity":
        nu = np.asarray(nu, dtype=float)
        if floating:
            return cls(nu[0:3], nu[3:6], nu[6:])
        return cls(np.zeros(3), np.zeros(3), nu)


def neutral_configuration(model: MultibodyModel) -> RobotConfiguration:
    """Base at the origin with identity rotation, joints at zero (clamped
    into their position limits when zero is out of range)."""
    positions = np.zeros(model.dof_count)
    for i, joint in enumerate(model._dof_joints):
        lim = joint.limits
        if lim is None:
            continue
        if lim.lower is not None and positions[i] < lim.lower:
            positions[i] = lim.lower
        if lim.upper is not None and positions[i] > lim.upper:
            positions[i] = lim.upper
    return RobotConfiguration(np.zeros(3), np.eye(3), positions)


def zero_velocity(model: MultibodyModel) -> RobotVelocity:
    return RobotVelocity(np.zeros(3), np.zeros(3), np.zeros(model.dof_count))


def check_dimensions(model: MultibodyModel, config: RobotConfiguration,
                     velocity: RobotVelocity | None = None) -> None:
    if config.joint_positions.shape[0] != model.dof_count:
        raise DimensionMismatch(
            f"configuration has {config.joint_positions.shape[0]} joint positions, "
            f"model has {model.dof_count} degrees of freedom")
    if velocity is not None and velocity.joint_velocities.shape[0] != model.dof_count:
        raise DimensionMismatch(
            f"velocity has {velocity.joint_velocities.shape[0]} joint rates, "
            f"model has {model.dof_count} degrees of freedom")


# --- URDF parsing -------------------------------------------------------------

def _parse_floats(text, count, what):
    parts = text.split()
    if len(parts) != count:
        raise InvalidUrdf(f"{what}: expected {count} numbers, got '{text}'")
    try:
        return [float(p) for p in parts]
    except ValueError as e:
        raise InvalidUrdf(f"{what}: bad number in '{text}'") from e


def _parse_origin(element, what) -> Transform:
    if element is None:
        return Transform.identity()
    xyz = _parse_floats(element.get("xyz", "0 0 0"), 3, f"{what} origin xyz")
    rpy = _parse_floats(element.get("rpy", "0 0 0"), 3, f"{what} origin rpy")
    return Transform(rotation_from_rpy(rpy), np.array(xyz))


def _parse_link(element) -> LinkSpec:
    name = element.get("name")
    if not name:
        raise InvalidUrdf("link without a name")
    inertial = element.find("inertial")
    if inertial is None:
        raise MissingInertial(name)
    mass_el = inertial.find("mass")
    if mass_el is None or mass_el.get("value") is None:
        raise MissingInertial(name)
    try:
        mass = float(mass_el.get("value"))
    except ValueError as e:
        raise InvalidUrdf(f"link '{name}': bad mass value") from e
    origin = _parse_origin(inertial.find("origin"), f"link '{name}' inertial")
    inertia_el = inertial.find("inertia")
    if inertia_el is None:
        values = {k: 0.0 for k in ("ixx", "ixy", "ixz", "iyy", "iyz", "izz")}
    else:
        try:
            values = {k: float(inertia_el.get(k, "0")) for k in
                      ("ixx", "ixy", "ixz", "iyy", "iyz", "izz")}
        except ValueError as e:
            raise InvalidUrdf(f"link '{name}': bad inertia value") from e
    tensor = np.array([
        [values["ixx"], values["ixy"], values["ixz"]],
        [values["ixy"], values["iyy"], values["iyz"]],
        [values["ixz"], values["iyz"], values["izz"]],
    ])
    # URDF gives the tensor about the com in inertial-frame axes; rotate it
    # into link-frame axes so downstream code sees a single convention.
    r = origin.rotation
    return LinkSpec(name=name, mass=mass, com=origin.translation,
                    inertia=r @ tensor @ r.T)


_JOINT_TYPES = {"revolute": REVOLUTE, "continuous": REVOLUTE,
                "prismatic": PRISMATIC, "fixed": FIXED}


def _parse_joint(element) -> JointSpec:
    name = element.get("name")
    if not name:
        raise InvalidUrdf("joint without a name")
    urdf_kind = element.get("type")
    if urdf_kind not in _JOINT_TYPES:
        raise UnsupportedJointType(name, urdf_kind)
    kind = _JOINT_TYPES[urdf_kind]

    parent_el = element.find("parent")
    child_el = element.find("child")
    if parent_el is None or child_el is None:
        raise InvalidUrdf(f"joint '{name}' needs <parent> and <child>")
    parent = parent_el.get("link")
    child = child_el.get("link")
    if not parent or not child:
        raise InvalidUrdf(f"joint '{name}': parent/child link attribute missing")

    origin = _parse_origin(element.find("origin"), f"joint '{name}'")
    axis = None
    if kind != FIXED:
        axis_el = element.find("axis")
        axis = np.array([1.0, 0.0, 0.0]) if axis_el is None else np.array(
            _parse_floats(axis_el.get("xyz", "1 0 0"), 3, f"joint '{name}' axis"))

    limits = None
    limit_el = element.find("limit")
    if limit_el is not None and kind != FIXED:
        def attr(key):
            raw = limit_el.get(key)
            if raw is None:
                return None
            try:
                return float(raw)
            except ValueError as e:
                raise InvalidUrdf(f"joint '{name}': bad limit {key}") from e

        lower, upper, effort = attr("lower"), attr("upper"), attr("effort")
        if urdf_kind == "continuous":
            lower = upper = None
        if lower is not None or upper is not None or effort is not None:
            limits = JointLimits(lower=lower, upper=upper, effort=effort)

    return JointSpec(name=name, kind=kind, parent=parent, child=child,
                     origin=origin, axis=axis, limits=limits)


def parse_urdf(document: str, floating: bool = False) -> MultibodyModel:
    """Build a model from URDF text. See the module docstring for the subset."""
    try:
        root = ET.fromstring(document)
    except ET.ParseError as e:
        raise MalformedXml(str(e)) from e
    if root.tag != "robot":
        raise InvalidUrdf(f"expected <robot> document root, got <{root.tag}>")
    name = root.get("name", "robot")
    links = [_parse_link(el) for el in root.findall("link")]
    joints = [_parse_joint(el) for el in root.findall("joint")]
    if not links:
        raise InvalidUrdf("document has no links")
    return MultibodyModel(name, links, joints, floating=floating)


def load_model(path, floating: bool = False) -> MultibodyModel:
    """Read a URDF file from disk. The entry point other formats would hang off."""
    try:
        with open(path, "r", encoding="utf-8") as f:
            text = f.read()
    except OSError as e:
        raise ModelLoadError(f"cannot read model file '{os.fspath(path)}': {e}") from e
    return parse_urdf(text, floating=floating)


# --- serialization ------------------------------------------------------------

def _fmt(x: float) -> str:
    return repr(float(x))


def to_urdf(model: MultibodyModel) -> str:
    """Serialize back to the supported URDF subset (joints in canonical order)."""
    out = [f'<robot name="{model.name}">']
    for link in model.links:
        i = link.inertia
        out.append(f'  <link name="{link.name}">')
        out.append("    <inertial>")
        out.append(f'      <origin xyz="{_fmt(link.com[0])} {_fmt(link.com[1])} '
                   f'{_fmt(link.com[2])}" rpy="0 0 0"/>')
        out.append(f'      <mass value="{_fmt(link.mass)}"/>')
        out.append(f'      <inertia ixx="{_fmt(i[0, 0])}" ixy="{_fmt(i[0, 1])}" '
                   f'ixz="{_fmt(i[0, 2])}" iyy="{_fmt(i[1, 1])}" '
                   f'iyz="{_fmt(i[1, 2])}" izz="{_fmt(i[2, 2])}"/>')
        out.append("    </inertial>")
        out.append("  </link>")
    for joint in model.joints:
        kind = joint.kind
        if kind == REVOLUTE and (joint.limits is None or joint.limits.lower is None):
            kind = "continuous"
        out.append(f'  <joint name="{joint.name}" type="{kind}">')
        out.append(f'    <parent link="{joint.parent}"/>')
        out.append(f'    <child link="{joint.child}"/>')
        rpy = rpy_from_rotation(joint.origin.rotation)
        t = joint.origin.translation
        out.append(f'    <origin xyz="{_fmt(t[0])} {_fmt(t[1])} {_fmt(t[2])}" '
                   f'rpy="{_fmt(rpy[0])} {_fmt(rpy[1])} {_fmt(rpy[2])}"/>')
        if joint.axis is not None:
            out.append(f'    <axis xyz="{_fmt(joint.axis[0])} {_fmt(joint.axis[1])} '
                       f'{_fmt(joint.axis[2])}"/>')
        lim = joint.limits
        if lim is not None:
            attrs = []
            if lim.lower is not None:
                attrs.append(f'lower="{_fmt(lim.lower)}"')
            if lim.upper is not None:
                attrs.append(f'upper="{_fmt(lim.upper)}"')
            if lim.effort is not None:
                attrs.append(f'effort="{_fmt(lim.effort)}"')
            out.append(f'    <limit {" ".join(attrs)}/>')
        out.append("  </joint>")
    out.append("</robot>")
    return "\n".join(out) + "\n"


def models_equal(a: MultibodyModel, b: MultibodyModel, tol: float = 0.0) -> bool:
    """Structural equality; ``tol`` allows for serialization round-off."""

    def close(x, y):
        if tol == 0.0:
            return np.array_equal(np.asarray(x), np.asarray(y))
        return np.allclose(x, y, rtol=0.0, atol=tol)

    if (a.name != b.name or a.floating != b.floating or a.base_link != b.base_link
            or len(a.links) != len(b.links) or len(a.joints) != len(b.joints)):
        return False
    for la, lb in zip(a.links, b.links):
        if la.name != lb.name or not close(la.mass, lb.mass):
            return False
        if not (close(la.com, lb.com) and close(la.inertia, lb.inertia)):
            return False
    for ja, jb in zip(a.joints, b.joints):
        if (ja.name, ja.kind, ja.parent, ja.child) != (jb.name, jb.kind, jb.parent, jb.child):
            return False
        if not (close(ja.origin.rotation, jb.origin.rotation)
                and close(ja.origin.translation, jb.origin.translation)):
            return False
        if (ja.axis is None) != (jb.axis is None):
            return False
        if ja.axis is not None and not close(ja.axis, jb.axis):
            return False
        la, lb = ja.limits, jb.limits
        if (la is None) != (lb is None):
            return False
        if la is not None:
            for xa, xb in ((la.lower, lb.lower), (la.upper, lb.upper), (la.effort, lb.effort)):
                if (xa is None) != (xb is None):
                    return False
                if xa is not None and not close(xa, xb):
                    return False
    return True
