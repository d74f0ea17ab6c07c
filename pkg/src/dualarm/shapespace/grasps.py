"""Grasp control poses attached to a canonical model and their transfer to
novel instances through a deformation field.

Each arm carries an ordered pose sequence (pre-grasp first, final grasp
last) expressed in the canonical-model frame. Positions are warped through
the field's kernel extension; orientations are re-derived by warping three
frame-offset points and re-orthonormalizing via polar decomposition.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import yaml

from ..transforms import RigidTransform
from .cpd import DeformationField

FRAME_PROBE_OFFSET = 0.01  # m, lever arm for orientation warping


@dataclass(frozen=True)
class ControlPose:
    label: str
    pose: RigidTransform


@dataclass(frozen=True)
class GraspSet:
    left: tuple[ControlPose, ...]
    right: tuple[ControlPose, ...]

    def arm(self, side: str) -> tuple[ControlPose, ...]:
        return self.left if side == "left" else self.right


def load_grasps(path) -> GraspSet:
    with open(path) as fh:
        spec = yaml.safe_load(fh)
    return grasps_from_dict(spec)


def grasps_from_dict(spec: dict) -> GraspSet:
    def parse_arm(entries):
        return tuple(
            ControlPose(
                label=str(e.get("label", f"pose_{i}")),
                pose=RigidTransform.from_rpy(e["xyz"], e.get("rpy", (0, 0, 0))),
            )
            for i, e in enumerate(entries)
        )

    return GraspSet(left=parse_arm(spec["left"]), right=parse_arm(spec["right"]))


def grasps_to_dict(grasps: GraspSet) -> dict:
    def dump_arm(poses):
        return [
            {
                "label": p.label,
                "xyz": [float(v) for v in p.pose.translation],
                "rpy": [float(v) for v in p.pose.rpy()],
            }
            for p in poses
        ]

    return {"left": dump_arm(grasps.left), "right": dump_arm(grasps.right)}


def save_grasps(path, grasps: GraspSet):
    with open(path, "w") as fh:
        yaml.safe_dump(grasps_to_dict(grasps), fh, sort_keys=False)


def _polar_rotation(m: np.ndarray) -> np.ndarray:
    u, _, vt = np.linalg.svd(m)
    rot = u @ vt
    if np.linalg.det(rot) < 0.0:
        u[:, -1] = -u[:, -1]
        rot = u @ vt
    return rot


def warp_pose(field: DeformationField, pose: RigidTransform) -> RigidTransform:
    """Warp one control pose: position through the kernel extension,
    orientation from the warped local frame."""
    origin = pose.translation
    probes = origin[None, :] + FRAME_PROBE_OFFSET * pose.rotation.T
    warped = field.warp(np.vstack([origin[None, :], probes]))
    new_origin = warped[0]
    axes = (warped[1:] - new_origin[None, :]).T / FRAME_PROBE_OFFSET
    # identity and rigid fields keep the frame orthonormal: take it as-is
    if np.abs(axes.T @ axes - np.eye(3)).max() < 1e-12:
        return RigidTransform(axes, new_origin)
    return RigidTransform(_polar_rotation(axes), new_origin)


def warp_grasp_set(field: DeformationField, grasps: GraspSet) -> GraspSet:
    return GraspSet(
        left=tuple(ControlPose(p.label, warp_pose(field, p.pose)) for p in grasps.left),
        right=tuple(ControlPose(p.label, warp_pose(field, p.pose)) for p in grasps.right),
    )


def warp_grasp_poses(field: DeformationField, space) -> GraspSet:
    """Warp the shape space's canonical control poses through a field."""
    if space.grasps is None:
        raise ValueError("shape space carries no grasp annotations")
    return warp_grasp_set(field, space.grasps)


# npz round trip helpers used by the shape-space bundle ---------------------


def grasps_to_arrays(grasps: GraspSet) -> dict:
    out = {}
    for side in ("left", "right"):
        poses = grasps.arm(side)
        out[f"grasp_{side}_pos"] = np.array([p.pose.translation for p in poses]).reshape(-1, 3)
        out[f"grasp_{side}_rot"] = np.array([p.pose.rotation for p in poses]).reshape(-1, 3, 3)
        out[f"grasp_{side}_labels"] = np.array([p.label for p in poses], dtype="U32")
    return out


def grasps_from_arrays(data) -> GraspSet | None:
    if "grasp_left_pos" not in data:
        return None

    def parse(side):
        pos = data[f"grasp_{side}_pos"]
        rot = data[f"grasp_{side}_rot"]
        labels = data[f"grasp_{side}_labels"]
        return tuple(
            ControlPose(str(labels[i]), RigidTransform(rot[i], pos[i]))
            for i in range(pos.shape[0])
        )

    return GraspSet(left=parse("left"), right=parse("right"))
