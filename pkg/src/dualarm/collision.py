"""Primitive-shape clearance queries between robot links and scene obstacles.

Signed clearance convention: positive values are separation distance,
negative values estimate penetration depth. Sphere/sphere, sphere/capsule,
capsule/capsule, sphere/box and capsule/box queries are exact (the latter via
golden-section minimization of a convex signed distance along the capsule
segment); box/box uses a separating-axis bound that never overestimates
clearance.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import TYPE_CHECKING

import numpy as np
import yaml

from .transforms import RigidTransform

if TYPE_CHECKING:
    from .kinematics import RobotModel

SPHERE, CAPSULE, BOX = 0, 1, 2
_GOLDEN = (np.sqrt(5.0) - 1.0) / 2.0
_GOLDEN_ITERS = 80


@dataclass(frozen=True)
class PrimitiveShape:
    """Sphere {radius}, capsule {radius, segment p0-p1 in the local frame} or
    box {half extents}, all dimensions in meters."""

    kind: int
    radius: float = 0.0
    p0: np.ndarray = field(default_factory=lambda: np.zeros(3))
    p1: np.ndarray = field(default_factory=lambda: np.zeros(3))
    half_extents: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        if self.kind in (SPHERE, CAPSULE) and self.radius <= 0.0:
            raise ValueError("radius must be strictly positive")
        if self.kind == BOX and np.any(np.asarray(self.half_extents) <= 0.0):
            raise ValueError("box half extents must be strictly positive")
        for name in ("p0", "p1", "half_extents"):
            v = np.asarray(getattr(self, name), dtype=float).reshape(3)
            v.flags.writeable = False
            object.__setattr__(self, name, v)

    @classmethod
    def sphere(cls, radius: float) -> "PrimitiveShape":
        return cls(SPHERE, radius=radius)

    @classmethod
    def capsule(cls, radius: float, p0, p1) -> "PrimitiveShape":
        return cls(CAPSULE, radius=radius, p0=np.asarray(p0), p1=np.asarray(p1))

    @classmethod
    def box(cls, half_extents) -> "PrimitiveShape":
        return cls(BOX, half_extents=np.asarray(half_extents))


@dataclass(frozen=True)
class CollisionBody:
    """A primitive shape attached to a link frame (or "world")."""

    name: str
    shape: PrimitiveShape
    attached_to: str
    local: RigidTransform = field(default_factory=RigidTransform.identity)


@dataclass(frozen=True)
class Scene:
    """Static obstacles plus self-collision pairs exempt from checking.

    Exempt pairs are stored symmetrically by body name. Bodies attached to
    the same or to directly connected links are exempted automatically when
    pairs are generated for a model (structural adjacency).
    """

    obstacles: tuple[CollisionBody, ...] = ()
    exempt_pairs: frozenset[frozenset[str]] = frozenset()

    def is_exempt(self, name_a: str, name_b: str) -> bool:
        return frozenset((name_a, name_b)) in self.exempt_pairs


def _segment_point_closest(p0, d, length_sq, point):
    if length_sq == 0.0:
        return p0
    t = np.clip(np.dot(point - p0, d) / length_sq, 0.0, 1.0)
    return p0 + t * d


def _segment_segment_distance(p0, p1, q0, q1):
    """Minimum distance between two 3D segments (Ericson, Real-Time
    Collision Detection, 5.1.9)."""
    d1 = p1 - p0
    d2 = q1 - q0
    r = p0 - q0
    a = d1 @ d1
    e = d2 @ d2
    f = d2 @ r
    if a <= 1e-18 and e <= 1e-18:
        return float(np.linalg.norm(r))
    if a <= 1e-18:
        s = 0.0
        t = np.clip(f / e, 0.0, 1.0)
    else:
        c = d1 @ r
        if e <= 1e-18:
            t = 0.0
            s = np.clip(-c / a, 0.0, 1.0)
        else:
            b = d1 @ d2
            denom = a * e - b * b
            s = np.clip((b * f - c * e) / denom, 0.0, 1.0) if denom > 1e-18 else 0.0
            t = (b * s + f) / e
            if t < 0.0:
                t = 0.0
                s = np.clip(-c / a, 0.0, 1.0)
            elif t > 1.0:
                t = 1.0
                s = np.clip((b - c) / a, 0.0, 1.0)
    closest1 = p0 + s * d1
    closest2 = q0 + t * d2
    return float(np.linalg.norm(closest1 - closest2))


def signed_point_box_distance(point, half_extents) -> float:
    """Signed distance from a point to a box surface in the box frame;
    negative inside. Convex in the point."""
    q = np.abs(point) - half_extents
    outside = np.linalg.norm(np.maximum(q, 0.0))
    inside = min(q.max(), 0.0)
    return float(outside + inside)


def _sphere_world_center(shape, pose):
    return pose.translation


def _capsule_world_segment(shape, pose):
    return pose.apply(shape.p0), pose.apply(shape.p1)


def _dist_sphere_sphere(a, pa, b, pb):
    d = np.linalg.norm(_sphere_world_center(a, pa) - _sphere_world_center(b, pb))
    return float(d - a.radius - b.radius)


def _dist_sphere_capsule(a, pa, b, pb):
    q0, q1 = _capsule_world_segment(b, pb)
    d = q1 - q0
    closest = _segment_point_closest(q0, d, float(d @ d), pa.translation)
    return float(np.linalg.norm(pa.translation - closest) - a.radius - b.radius)


def _dist_capsule_capsule(a, pa, b, pb):
    p0, p1 = _capsule_world_segment(a, pa)
    q0, q1 = _capsule_world_segment(b, pb)
    return _segment_segment_distance(p0, p1, q0, q1) - a.radius - b.radius


def _dist_sphere_box(a, pa, b, pb):
    center_local = pb.inverse().apply(pa.translation)
    return signed_point_box_distance(center_local, b.half_extents) - a.radius


def _dist_capsule_box(a, pa, b, pb):
    inv = pb.inverse()
    p0 = inv.apply(pa.apply(a.p0))
    p1 = inv.apply(pa.apply(a.p1))
    h = b.half_extents

    def g(s):
        return signed_point_box_distance(p0 + s * (p1 - p0), h)

    # signed box distance is convex along the segment: golden-section search
    lo, hi = 0.0, 1.0
    m1 = hi - _GOLDEN * (hi - lo)
    m2 = lo + _GOLDEN * (hi - lo)
    g1, g2 = g(m1), g(m2)
    for _ in range(_GOLDEN_ITERS):
        if g1 <= g2:
            hi, m2, g2 = m2, m1, g1
            m1 = hi - _GOLDEN * (hi - lo)
            g1 = g(m1)
        else:
            lo, m1, g1 = m1, m2, g2
            m2 = lo + _GOLDEN * (hi - lo)
            g2 = g(m2)
    return min(g(lo), g1, g2, g(hi)) - a.radius


def _box_axes_extents(shape, pose):
    return pose.rotation, shape.half_extents


def _dist_box_box(a, pa, b, pb):
    """Separating-axis bound over the 15 candidate axes: exact translation-
    to-separation when overlapping, a lower bound on clearance otherwise."""
    rot_a, ha = _box_axes_extents(a, pa)
    rot_b, hb = _box_axes_extents(b, pb)
    delta = pb.translation - pa.translation
    axes = [rot_a[:, i] for i in range(3)] + [rot_b[:, i] for i in range(3)]
    for i in range(3):
        for j in range(3):
            cr = np.cross(rot_a[:, i], rot_b[:, j])
            n = np.linalg.norm(cr)
            if n > 1e-9:
                axes.append(cr / n)
    best = -np.inf
    for u in axes:
        ra = ha @ np.abs(rot_a.T @ u)
        rb = hb @ np.abs(rot_b.T @ u)
        gap = abs(delta @ u) - ra - rb
        best = max(best, gap)
    return float(best)


_DISPATCH = {
    (SPHERE, SPHERE): _dist_sphere_sphere,
    (SPHERE, CAPSULE): _dist_sphere_capsule,
    (CAPSULE, CAPSULE): _dist_capsule_capsule,
    (SPHERE, BOX): _dist_sphere_box,
    (CAPSULE, BOX): _dist_capsule_box,
    (BOX, BOX): _dist_box_box,
}


def _operand_key(shape, pose):
    return (shape.kind, tuple(pose.translation), shape.radius,
            tuple(shape.half_extents), tuple(shape.p0), tuple(shape.p1))


def pair_distance(a: PrimitiveShape, pose_a: RigidTransform,
                  b: PrimitiveShape, pose_b: RigidTransform) -> float:
    """Signed clearance between two posed primitives (meters).

    Exact-symmetric: operands are ordered canonically before dispatch so
    swapping the arguments returns a bit-identical result.
    """
    if _operand_key(b, pose_b) < _operand_key(a, pose_a):
        a, pose_a, b, pose_b = b, pose_b, a, pose_a
    fn = _DISPATCH.get((a.kind, b.kind))
    if fn is None:
        fn = _DISPATCH[(b.kind, a.kind)]
        a, pose_a, b, pose_b = b, pose_b, a, pose_a
    return fn(a, pose_a, b, pose_b)


# ---------------------------------------------------------------------------
# Model-level queries
# ---------------------------------------------------------------------------


def _chain_of(model: "RobotModel", frame: str) -> tuple[int, int]:
    """(chain id, index) of a link frame: chain -1 for the torso."""
    for cid, chain in enumerate((model.left, model.right)):
        for idx, joint in enumerate(chain):
            if joint.name == frame:
                return cid, idx
    return -1, -1


def structurally_adjacent(model: "RobotModel", frame_a: str, frame_b: str) -> bool:
    """Frames equal, close together within one chain, or either is the
    torso adjacent to a chain's first link. Within a chain an index gap up
    to 3 counts as adjacent, which collapses co-located joint clusters
    (shoulder/wrist triplets) whose bodies can never separate."""
    if frame_a == frame_b:
        return True
    ca, ia = _chain_of(model, frame_a)
    cb, ib = _chain_of(model, frame_b)
    if ca == -1 and cb != -1:
        return ib == 0
    if cb == -1 and ca != -1:
        return ia == 0
    return ca == cb and abs(ia - ib) <= 3


def collision_pairs(model: "RobotModel", scene: Scene) -> list[tuple[CollisionBody, CollisionBody]]:
    """Non-exempt body pairs: robot/robot (skipping structural adjacency and
    scene exemptions) plus every robot/obstacle pair."""
    pairs = []
    bodies = list(model.bodies)
    for i in range(len(bodies)):
        for j in range(i + 1, len(bodies)):
            a, b = bodies[i], bodies[j]
            if scene.is_exempt(a.name, b.name):
                continue
            if structurally_adjacent(model, a.attached_to, b.attached_to):
                continue
            pairs.append((a, b))
    for body in bodies:
        for obstacle in scene.obstacles:
            if scene.is_exempt(body.name, obstacle.name):
                continue
            pairs.append((body, obstacle))
    return pairs


def body_world_pose(body: CollisionBody, frames: dict[str, RigidTransform]) -> RigidTransform:
    if body.attached_to == "world":
        return body.local
    return frames[body.attached_to] @ body.local


def min_clearance(model: "RobotModel", scene: Scene, config) -> tuple[float, tuple[str, str]]:
    """Minimum signed clearance over all non-exempt pairs, with the pair of
    body names that attains it."""
    from .kinematics import forward_kinematics

    frames = forward_kinematics(model, config)
    best = np.inf
    best_pair = ("", "")
    for a, b in collision_pairs(model, scene):
        d = pair_distance(a.shape, body_world_pose(a, frames),
                          b.shape, body_world_pose(b, frames))
        if d < best:
            best = d
            best_pair = (a.name, b.name)
    return float(best), best_pair


# ---------------------------------------------------------------------------
# Packed numeric form consumed by the batch kernels
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PackedScene:
    """Flat arrays describing all candidate collision pairs for a model in
    a scene; consumed by the batch kernels."""

    kind: np.ndarray  # (nb,) int32
    attach: np.ndarray  # (nb,) int32: joint index, J for torso, -1 world
    pa: np.ndarray  # (nb, 3) sphere center / capsule p0 / box center
    pb: np.ndarray  # (nb, 3) capsule p1
    brot: np.ndarray  # (nb, 3, 3) box orientation in the attach frame
    size: np.ndarray  # (nb, 3) [radius,...] or half extents
    pairs: np.ndarray  # (n_pairs, 2) int32
    pair_names: tuple[tuple[str, str], ...]


def pack_scene(model: "RobotModel", scene: Scene) -> PackedScene:
    bodies = list(model.bodies) + list(scene.obstacles)
    frame_index = {name: i for i, name in enumerate(model.joint_names)}
    frame_index["torso"] = model.dof

    nb = len(bodies)
    kind = np.zeros(nb, dtype=np.int32)
    attach = np.zeros(nb, dtype=np.int32)
    pa = np.zeros((nb, 3))
    pb = np.zeros((nb, 3))
    brot = np.tile(np.eye(3), (nb, 1, 1))
    size = np.zeros((nb, 3))
    for i, body in enumerate(bodies):
        shape = body.shape
        kind[i] = shape.kind
        attach[i] = -1 if body.attached_to == "world" else frame_index[body.attached_to]
        if shape.kind == SPHERE:
            pa[i] = body.local.translation
            size[i, 0] = shape.radius
        elif shape.kind == CAPSULE:
            pa[i] = body.local.apply(shape.p0)
            pb[i] = body.local.apply(shape.p1)
            size[i, 0] = shape.radius
        else:
            pa[i] = body.local.translation
            brot[i] = body.local.rotation
            size[i] = shape.half_extents

    index_of = {id(b): i for i, b in enumerate(bodies)}
    pair_list = collision_pairs(model, scene)
    pairs = np.array(
        [[index_of[id(a)], index_of[id(b)]] for a, b in pair_list], dtype=np.int32
    ).reshape(-1, 2)
    names = tuple((a.name, b.name) for a, b in pair_list)
    return PackedScene(
        kind=kind,
        attach=attach,
        pa=np.ascontiguousarray(pa),
        pb=np.ascontiguousarray(pb),
        brot=np.ascontiguousarray(brot),
        size=np.ascontiguousarray(size),
        pairs=np.ascontiguousarray(pairs),
        pair_names=names,
    )


# ---------------------------------------------------------------------------
# File formats
# ---------------------------------------------------------------------------


def shape_from_dict(entry: dict) -> PrimitiveShape:
    kind = entry["shape"]
    if kind == "sphere":
        return PrimitiveShape.sphere(float(entry["radius"]))
    if kind == "capsule":
        return PrimitiveShape.capsule(float(entry["radius"]), entry["p0"], entry["p1"])
    if kind == "box":
        return PrimitiveShape.box(entry["half_extents"])
    raise ValueError(f"unknown shape kind {kind!r}")


def body_from_dict(entry: dict) -> CollisionBody:
    return CollisionBody(
        name=entry["name"],
        shape=shape_from_dict(entry),
        attached_to=entry.get("link", "world"),
        local=RigidTransform.from_rpy(
            entry.get("xyz", (0, 0, 0)), entry.get("rpy", (0, 0, 0))
        ),
    )


def scene_from_dict(spec: dict) -> Scene:
    obstacles = tuple(body_from_dict(e) for e in spec.get("obstacles", []))
    exempt = frozenset(
        frozenset((str(a), str(b))) for a, b in spec.get("exempt_pairs", [])
    )
    return Scene(obstacles=obstacles, exempt_pairs=exempt)


def load_scene(path) -> Scene:
    with open(path) as fh:
        return scene_from_dict(yaml.safe_load(fh) or {})
