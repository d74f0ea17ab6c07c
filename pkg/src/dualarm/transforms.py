"""Rigid transforms and rotation parameterizations.

Conventions used throughout the package:
  * rotations are 3x3 orthonormal matrices with det +1,
  * roll/pitch/yaw (rpy) composes as R = Rz(yaw) @ Ry(pitch) @ Rx(roll),
  * angles are wrapped to the half-open interval (-pi, pi].
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

ORTHONORMAL_TOL = 1e-9
GIMBAL_COS_TOL = 1e-8


def wrap_angle(a):
    """Wrap angle(s) to (-pi, pi]. Works on scalars and arrays."""
    w = -((-np.asarray(a) + np.pi) % (2.0 * np.pi) - np.pi)
    return w if isinstance(a, np.ndarray) else float(w)


def rotation_about_axis(axis: np.ndarray, angle: float) -> np.ndarray:
    """Rodrigues rotation matrix about a unit axis."""
    x, y, z = axis
    c, s = np.cos(angle), np.sin(angle)
    v = 1.0 - c
    return np.array(
        [
            [x * x * v + c, x * y * v - z * s, x * z * v + y * s],
            [x * y * v + z * s, y * y * v + c, y * z * v - x * s],
            [x * z * v - y * s, y * z * v + x * s, z * z * v + c],
        ]
    )


def rpy_to_matrix(rpy) -> np.ndarray:
    """Rotation matrix from roll/pitch/yaw, R = Rz(y) @ Ry(p) @ Rx(r)."""
    r, p, y = rpy
    cr, sr = np.cos(r), np.sin(r)
    cp, sp = np.cos(p), np.sin(p)
    cy, sy = np.cos(y), np.sin(y)
    return np.array(
        [
            [cy * cp, cy * sp * sr - sy * cr, cy * sp * cr + sy * sr],
            [sy * cp, sy * sp * sr + cy * cr, sy * sp * cr - cy * sr],
            [-sp, cp * sr, cp * cr],
        ]
    )


def matrix_to_rpy(rot: np.ndarray) -> np.ndarray:
    """Roll/pitch/yaw of a rotation matrix, each component in (-pi, pi].

    At the pitch singularity (|cos p| ~ 0) roll is set to zero and the
    remaining freedom is absorbed into yaw; use :func:`is_gimbal` to detect
    that case.
    """
    cp = np.hypot(rot[0, 0], rot[1, 0])
    pitch = np.arctan2(-rot[2, 0], cp)
    if cp < GIMBAL_COS_TOL:
        roll = 0.0
        yaw = np.arctan2(-rot[0, 1], rot[1, 1])
    else:
        roll = np.arctan2(rot[2, 1], rot[2, 2])
        yaw = np.arctan2(rot[1, 0], rot[0, 0])
    return wrap_angle(np.array([roll, pitch, yaw]))


def is_gimbal(rot: np.ndarray, cos_tol: float = GIMBAL_COS_TOL) -> bool:
    """True when the rpy extraction of ``rot`` is gimbal-degenerate."""
    return bool(np.hypot(rot[0, 0], rot[1, 0]) < cos_tol)


def rotation_log(rot: np.ndarray) -> np.ndarray:
    """Rotation vector (axis * angle) of a rotation matrix."""
    cos_a = np.clip((np.trace(rot) - 1.0) / 2.0, -1.0, 1.0)
    angle = np.arccos(cos_a)
    skew = np.array([rot[2, 1] - rot[1, 2], rot[0, 2] - rot[2, 0],
                     rot[1, 0] - rot[0, 1]])
    if angle < 1e-8:
        return 0.5 * skew
    if np.pi - angle < 1e-6:
        # near pi the skew part vanishes; recover the axis from R + I
        m = (rot + np.eye(3)) / 2.0
        k = int(np.argmax(np.diag(m)))
        axis = m[:, k] / np.linalg.norm(m[:, k])
        if skew @ axis < 0.0:
            axis = -axis
        return angle * axis
    return angle / (2.0 * np.sin(angle)) * skew


def _check_rotation(rot: np.ndarray, tol: float = ORTHONORMAL_TOL):
    err = np.abs(rot @ rot.T - np.eye(3)).max()
    if err > tol or np.linalg.det(rot) < 0.0:
        raise ValueError(f"rotation is not orthonormal (max error {err:.2e})")


@dataclass(frozen=True)
class RigidTransform:
    """Pose of one frame in another: rotation matrix plus translation."""

    rotation: np.ndarray = field(default_factory=lambda: np.eye(3))
    translation: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        rot = np.asarray(self.rotation, dtype=float).reshape(3, 3)
        t = np.asarray(self.translation, dtype=float).reshape(3)
        _check_rotation(rot)
        rot.flags.writeable = False
        t.flags.writeable = False
        object.__setattr__(self, "rotation", rot)
        object.__setattr__(self, "translation", t)

    @classmethod
    def identity(cls) -> "RigidTransform":
        return cls()

    @classmethod
    def from_rpy(cls, xyz, rpy) -> "RigidTransform":
        return cls(rpy_to_matrix(rpy), np.asarray(xyz, dtype=float))

    def compose(self, other: "RigidTransform") -> "RigidTransform":
        """self ∘ other: apply ``other`` first in self's frame."""
        return RigidTransform(
            self.rotation @ other.rotation,
            self.rotation @ other.translation + self.translation,
        )

    def __matmul__(self, other: "RigidTransform") -> "RigidTransform":
        return self.compose(other)

    def inverse(self) -> "RigidTransform":
        rot_t = self.rotation.T.copy()
        return RigidTransform(rot_t, -rot_t @ self.translation)

    def apply(self, points: np.ndarray) -> np.ndarray:
        """Transform one point (3,) or a stack of points (n, 3)."""
        pts = np.asarray(points, dtype=float)
        return pts @ self.rotation.T + self.translation

    def rpy(self) -> np.ndarray:
        return matrix_to_rpy(self.rotation)

    def almost_equal(self, other: "RigidTransform", tol: float = 1e-9) -> bool:
        return (
            np.abs(self.rotation - other.rotation).max() <= tol
            and np.abs(self.translation - other.translation).max() <= tol
        )
