"""Rotations, rigid transforms and 6-D velocity/force values.

Conventions used everywhere in this package:

* 3-vectors are float ndarrays of shape (3,);
* rotations are 3x3 orthonormal matrices with determinant +1;
* 6-D quantities are ordered linear part first, angular part second
  (force before moment, linear velocity before angular velocity).
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidRotation

ROTATION_TOL = 1e-9


def _vec3(x) -> np.ndarray:
    v = np.asarray(x, dtype=float)
    if v.shape != (3,):
        raise ValueError(f"expected a 3-vector, got shape {v.shape}")
    if not math.isfinite(v.sum()):  # cheap finiteness check
        raise ValueError("vector components must be finite")
    return v


def skew(x) -> np.ndarray:
    """Skew-symmetric matrix S such that S @ y == cross(x, y) for all y."""
    x = _vec3(x)
    return np.array([
        [0.0, -x[2], x[1]],
        [x[2], 0.0, -x[0]],
        [-x[1], x[0], 0.0],
    ])


def unskew(m) -> np.ndarray:
    """Inverse of :func:`skew` for (approximately) skew-symmetric matrices."""
    m = np.asarray(m, dtype=float)
    return 0.5 * np.array([m[2, 1] - m[1, 2], m[0, 2] - m[2, 0], m[1, 0] - m[0, 1]])


def exp_so3(omega, dt: float = 1.0) -> np.ndarray:
    """Rotation reached by spinning at constant rate ``omega`` for ``dt`` seconds.

    Uses the closed-form Rodrigues expression, falling back to a second-order
    series when the rotation angle is below 1e-8 rad to avoid dividing by a
    near-zero angle.
    """
    w = _vec3(omega) * float(dt)
    angle = float(np.linalg.norm(w))
    k = skew(w)
    if angle < 1e-8:
        return np.eye(3) + k + 0.5 * (k @ k)
    a = np.sin(angle) / angle
    b = (1.0 - np.cos(angle)) / (angle * angle)
    return np.eye(3) + a * k + b * (k @ k)


def is_rotation(m, tol: float = ROTATION_TOL) -> bool:
    m = np.asarray(m, dtype=float)
    if m.shape != (3, 3) or not np.all(np.isfinite(m)):
        return False
    if np.max(np.abs(m.T @ m - np.eye(3))) > tol:
        return False
    return abs(np.linalg.det(m) - 1.0) <= tol


def check_rotation(m, tol: float = ROTATION_TOL) -> np.ndarray:
    """Return ``m`` as a float array, raising :class:`InvalidRotation` if unfit."""
    m = np.asarray(m, dtype=float)
    if not is_rotation(m, tol):
        raise InvalidRotation("matrix is not orthonormal with det +1")
    return m


def orthonormalize(m) -> np.ndarray:
    """Nearest rotation matrix in the Frobenius sense (polar decomposition)."""
    u, _, vt = np.linalg.svd(np.asarray(m, dtype=float))
    r = u @ vt
    if np.linalg.det(r) < 0.0:
        u = u.copy()
        u[:, -1] = -u[:, -1]
        r = u @ vt
    return r


@dataclass(frozen=True)
class Transform:
    """Rigid transform: ``apply(p) = rotation @ p + translation``."""

    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self):
        r = np.asarray(self.rotation, dtype=float)
        t = _vec3(self.translation)
        if r.shape != (3, 3) or not math.isfinite(r.sum()):
            raise ValueError("rotation must be a finite 3x3 matrix")
        object.__setattr__(self, "rotation", r)
        object.__setattr__(self, "translation", t)

    @classmethod
    def identity(cls) -> "Transform":
        return cls(np.eye(3), np.zeros(3))

    def apply(self, point) -> np.ndarray:
        return self.rotation @ _vec3(point) + self.translation

    def compose(self, other: "Transform") -> "Transform":
        """Transform equal to applying ``other`` first, then ``self``."""
        return Transform(self.rotation @ other.rotation,
                         self.rotation @ other.translation + self.translation)

    def __matmul__(self, other: "Transform") -> "Transform":
        return self.compose(other)

    def inverse(self) -> "Transform":
        rt = self.rotation.T
        return Transform(rt, -(rt @ self.translation))

    def almost_equal(self, other: "Transform", tol: float = 1e-12) -> bool:
        return (np.max(np.abs(self.rotation - other.rotation)) <= tol
                and np.max(np.abs(self.translation - other.translation)) <= tol)


def transform_point(t: Transform, p) -> np.ndarray:
    """World coordinates of a point given in the frame described by ``t``."""
    return t.apply(p)


@dataclass(frozen=True)
class Twist:
    """6-D velocity: linear velocity of a point plus angular velocity."""

    linear: np.ndarray
    angular: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "linear", _vec3(self.linear))
        object.__setattr__(self, "angular", _vec3(self.angular))

    def to_array(self) -> np.ndarray:
        return np.concatenate([self.linear, self.angular])

    @classmethod
    def from_array(cls, v) -> "Twist":
        v = np.asarray(v, dtype=float)
        return cls(v[:3], v[3:6])


@dataclass(frozen=True)
class Wrench:
    """6-D force: pure force plus moment about the point of application."""

    force: np.ndarray
    moment: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "force", _vec3(self.force))
        object.__setattr__(self, "moment", _vec3(self.moment))

    def to_array(self) -> np.ndarray:
        return np.concatenate([self.force, self.moment])

    @classmethod
    def from_array(cls, v) -> "Wrench":
        v = np.asarray(v, dtype=float)
        return cls(v[:3], v[3:6])

    @classmethod
    def zero(cls) -> "Wrench":
        return cls(np.zeros(3), np.zeros(3))
