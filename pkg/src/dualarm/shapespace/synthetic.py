"""Procedural object categories for training and evaluating grasp transfer.

Two parametric families are provided: watering-can-like objects (tapered
body, D-shaped handle, angled spout) and two-handed drill-like objects
(horizontal body, vertical rear handle, front head). Surface points are
sampled on deterministic grids so instances of one family are smooth
deformations of each other, and every instance knows its own ground-truth
two-arm grasp poses.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from ..transforms import RigidTransform
from .cloud import PointCloud
from .grasps import ControlPose, GraspSet

PREGRASP_BACKOFF = 0.05  # m, retraction along the approach direction
PREGRASP_LIFT = 0.05  # m, hover height above the grasp (tabletop approach)


def _frame_from_axes(x_axis: np.ndarray, z_hint: np.ndarray) -> np.ndarray:
    x = x_axis / np.linalg.norm(x_axis)
    y = np.cross(z_hint, x)
    n = np.linalg.norm(y)
    if n < 1e-9:
        y = np.cross(np.array([0.0, 1.0, 0.0]), x)
        n = np.linalg.norm(y)
    y /= n
    z = np.cross(x, y)
    return np.column_stack([x, y, z])


def _grasp_pair(position: np.ndarray, approach: np.ndarray,
                z_hint: np.ndarray) -> tuple[ControlPose, ControlPose]:
    rot = _frame_from_axes(approach, z_hint)
    grasp = RigidTransform(rot, position)
    hover = position - PREGRASP_BACKOFF * rot[:, 0] + PREGRASP_LIFT * np.array(
        [0.0, 0.0, 1.0]
    )
    pre = RigidTransform(rot, hover)
    return ControlPose("pre_grasp", pre), ControlPose("grasp", grasp)


# ---------------------------------------------------------------------------
# Watering-can-like family
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CanParams:
    body_height: float = 0.26
    body_radius: float = 0.062
    taper: float = 0.92  # top radius relative to bottom radius
    handle_bulge: float = 0.085  # m, how far the handle arcs away from the body
    spout_length: float = 0.17
    spout_angle: float = 0.55  # rad above horizontal
    spout_height: float = 0.35  # attachment height, fraction of body height


CANONICAL_CAN = CanParams()


def _can_radius(p: CanParams, z: np.ndarray) -> np.ndarray:
    return p.body_radius * (1.0 + (p.taper - 1.0) * z / p.body_height)


def sample_can(p: CanParams, rng: np.random.Generator | None = None,
               noise: float = 0.0) -> PointCloud:
    """Deterministic surface grid of a can instance; optional isotropic
    Gaussian noise in meters."""
    pts = []
    # body lateral surface
    thetas = np.linspace(0.0, 2.0 * np.pi, 26, endpoint=False)
    zs = np.linspace(0.0, p.body_height, 13)
    tt, zz = np.meshgrid(thetas, zs)
    rr = _can_radius(p, zz)
    pts.append(np.column_stack([
        (rr * np.cos(tt)).ravel(), (rr * np.sin(tt)).ravel(), zz.ravel()
    ]))
    # top and bottom covers (rings)
    for z, frac in ((p.body_height, (0.35, 0.7)), (0.0, (0.5,))):
        r_edge = float(_can_radius(p, np.asarray(z)))
        for f in frac:
            ring = np.linspace(0.0, 2.0 * np.pi, 14, endpoint=False)
            pts.append(np.column_stack([
                f * r_edge * np.cos(ring), f * r_edge * np.sin(ring),
                np.full(ring.shape, z),
            ]))
    # D-shaped handle on the -x side, arcing in the xz-plane
    top_attach = np.array([-float(_can_radius(p, np.asarray(p.body_height))), 0.0,
                           p.body_height])
    low_attach = np.array([-float(_can_radius(p, np.asarray(0.3 * p.body_height))),
                           0.0, 0.3 * p.body_height])
    chord = top_attach - low_attach
    mid = 0.5 * (top_attach + low_attach)
    out_dir = np.cross(chord / np.linalg.norm(chord), np.array([0.0, 1.0, 0.0]))
    out_dir *= np.sign(out_dir @ np.array([-1.0, 0.0, 0.0]))
    arc_t = np.linspace(0.0, np.pi, 20)
    centerline = (
        mid[None, :]
        - 0.5 * chord[None, :] * np.cos(arc_t)[:, None]
        + p.handle_bulge * out_dir[None, :] * np.sin(arc_t)[:, None]
    )
    tube_angles = np.linspace(0.0, 2.0 * np.pi, 6, endpoint=False)
    tube_r = 0.013
    tangents = np.gradient(centerline, axis=0)
    tangents /= np.linalg.norm(tangents, axis=1, keepdims=True)
    for i, c in enumerate(centerline):
        n1 = np.cross(tangents[i], np.array([0.0, 1.0, 0.0]))
        n1 /= np.linalg.norm(n1)
        n2 = np.cross(tangents[i], n1)
        ring = (
            c[None, :]
            + tube_r * np.cos(tube_angles)[:, None] * n1[None, :]
            + tube_r * np.sin(tube_angles)[:, None] * n2[None, :]
        )
        pts.append(ring)
    # spout: tapered tube leaving the +x side upward
    z_attach = p.spout_height * p.body_height
    base = np.array([float(_can_radius(p, np.asarray(z_attach))), 0.0, z_attach])
    direction = np.array([np.cos(p.spout_angle), 0.0, np.sin(p.spout_angle)])
    s = np.linspace(0.0, 1.0, 10)
    radii = 0.014 * (1.0 - 0.45 * s)
    n1 = np.array([0.0, 1.0, 0.0])
    n2 = np.cross(direction, n1)
    for si, ri in zip(s, radii):
        c = base + si * p.spout_length * direction
        ring = (
            c[None, :]
            + ri * np.cos(tube_angles)[:, None] * n1[None, :]
            + ri * np.sin(tube_angles)[:, None] * n2[None, :]
        )
        pts.append(ring)

    cloud = np.vstack(pts)
    if noise > 0.0:
        if rng is None:
            raise ValueError("noise requires an rng")
        cloud = cloud + rng.normal(0.0, noise, size=cloud.shape)
    return PointCloud(cloud)


def can_grasps(p: CanParams) -> GraspSet:
    """Ground-truth two-arm grasp: left hand on the handle apex approaching
    toward the body, right hand supporting the body on its -y side."""
    top_attach = np.array([-float(_can_radius(p, np.asarray(p.body_height))), 0.0,
                           p.body_height])
    low_attach = np.array([-float(_can_radius(p, np.asarray(0.3 * p.body_height))),
                           0.0, 0.3 * p.body_height])
    chord = top_attach - low_attach
    mid = 0.5 * (top_attach + low_attach)
    out_dir = np.cross(chord / np.linalg.norm(chord), np.array([0.0, 1.0, 0.0]))
    out_dir *= np.sign(out_dir @ np.array([-1.0, 0.0, 0.0]))
    apex = mid + p.handle_bulge * out_dir
    left = _grasp_pair(apex, -out_dir, np.array([0.0, 0.0, 1.0]))

    z_support = 0.45 * p.body_height
    surface = np.array([0.0, -float(_can_radius(p, np.asarray(z_support))), z_support])
    right = _grasp_pair(surface, np.array([0.0, 1.0, 0.0]), np.array([0.0, 0.0, 1.0]))
    return GraspSet(left=left, right=right)


def random_can_params(rng: np.random.Generator, spread: float = 1.0) -> CanParams:
    u = lambda lo, hi: float(rng.uniform(lo, hi))
    s = spread
    return CanParams(
        body_height=u(0.26 - 0.05 * s, 0.26 + 0.05 * s),
        body_radius=u(0.062 - 0.012 * s, 0.062 + 0.012 * s),
        taper=u(0.92 - 0.12 * s, 0.92 + 0.10 * s),
        handle_bulge=u(0.085 - 0.02 * s, 0.085 + 0.02 * s),
        spout_length=u(0.17 - 0.035 * s, 0.17 + 0.035 * s),
        spout_angle=u(0.55 - 0.12 * s, 0.55 + 0.12 * s),
        spout_height=u(0.35 - 0.06 * s, 0.35 + 0.06 * s),
    )


def scaled_can(p: CanParams, factor: float) -> CanParams:
    """Uniform scale of every metric parameter (taper and angles fixed)."""
    return replace(
        p,
        body_height=factor * p.body_height,
        body_radius=factor * p.body_radius,
        handle_bulge=factor * p.handle_bulge,
        spout_length=factor * p.spout_length,
    )


# ---------------------------------------------------------------------------
# Two-handed drill-like family
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DrillParams:
    body_length: float = 0.34
    body_radius: float = 0.042
    handle_height: float = 0.16
    handle_offset: float = 0.10  # handle position behind the body center
    head_radius: float = 0.055
    head_length: float = 0.07


CANONICAL_DRILL = DrillParams()


def sample_drill(p: DrillParams, rng: np.random.Generator | None = None,
                 noise: float = 0.0) -> PointCloud:
    pts = []
    tube_angles = np.linspace(0.0, 2.0 * np.pi, 16, endpoint=False)
    xs = np.linspace(-0.5 * p.body_length, 0.5 * p.body_length, 14)
    for x in xs:
        pts.append(np.column_stack([
            np.full(tube_angles.shape, x),
            p.body_radius * np.cos(tube_angles),
            p.body_radius * np.sin(tube_angles) + p.body_radius,
        ]))
    # head at the front (+x)
    head_x = np.linspace(0.5 * p.body_length, 0.5 * p.body_length + p.head_length, 5)
    for x in head_x:
        pts.append(np.column_stack([
            np.full(tube_angles.shape, x),
            p.head_radius * np.cos(tube_angles),
            p.head_radius * np.sin(tube_angles) + p.body_radius,
        ]))
    # vertical handle behind the center, going down
    hx = -p.handle_offset
    zs = np.linspace(0.0, -p.handle_height, 10)
    handle_angles = np.linspace(0.0, 2.0 * np.pi, 8, endpoint=False)
    for z in zs:
        pts.append(np.column_stack([
            hx + 0.016 * np.cos(handle_angles),
            0.016 * np.sin(handle_angles),
            np.full(handle_angles.shape, z),
        ]))
    cloud = np.vstack(pts)
    if noise > 0.0:
        if rng is None:
            raise ValueError("noise requires an rng")
        cloud = cloud + rng.normal(0.0, noise, size=cloud.shape)
    return PointCloud(cloud)


def drill_grasps(p: DrillParams) -> GraspSet:
    """Right hand on the rear handle, left hand under the body front."""
    handle_mid = np.array([-p.handle_offset, 0.0, -0.55 * p.handle_height])
    right = _grasp_pair(handle_mid, np.array([1.0, 0.0, 0.0]),
                        np.array([0.0, 0.0, 1.0]))
    front = np.array([0.35 * p.body_length, 0.0, p.body_radius - p.body_radius])
    left = _grasp_pair(front, np.array([0.0, 0.0, 1.0]), np.array([1.0, 0.0, 0.0]))
    return GraspSet(left=left, right=right)


def random_drill_params(rng: np.random.Generator, spread: float = 1.0) -> DrillParams:
    u = lambda lo, hi: float(rng.uniform(lo, hi))
    s = spread
    return DrillParams(
        body_length=u(0.34 - 0.05 * s, 0.34 + 0.05 * s),
        body_radius=u(0.042 - 0.008 * s, 0.042 + 0.008 * s),
        handle_height=u(0.16 - 0.03 * s, 0.16 + 0.03 * s),
        handle_offset=u(0.10 - 0.025 * s, 0.10 + 0.025 * s),
        head_radius=u(0.055 - 0.01 * s, 0.055 + 0.012 * s),
        head_length=u(0.07 - 0.015 * s, 0.07 + 0.015 * s),
    )
