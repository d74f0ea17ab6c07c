"""Dual-arm kinematic model: two serial chains rooted at a shared torso.

Joint configurations are plain float arrays of length ``model.dof`` ordered
as left-chain joints followed by right-chain joints. Forward kinematics is a
pure function of the model and a configuration; models are immutable after
construction and safe to share between threads.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import yaml

from .transforms import RigidTransform, matrix_to_rpy, rotation_about_axis, wrap_angle

GRAVITY = 9.81

TORSO_FRAME = "torso"
EEF_LEFT = "eef_left"
EEF_RIGHT = "eef_right"


class ConfigurationError(ValueError):
    """Joint configuration has the wrong length or non-finite entries."""


@dataclass(frozen=True)
class JointSpec:
    """One revolute joint: fixed origin in the parent link, then rotation
    about ``axis``. The child-link frame coincides with the rotated joint
    frame, so the joint name doubles as its child-link frame name."""

    name: str
    axis: np.ndarray
    origin: RigidTransform
    lower: float
    upper: float
    effort: float | None = None
    mass: float = 0.0
    com: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        axis = np.asarray(self.axis, dtype=float).reshape(3)
        if abs(np.linalg.norm(axis) - 1.0) > 1e-9:
            raise ValueError(f"joint {self.name}: axis must have unit norm")
        if not self.lower < self.upper:
            raise ValueError(f"joint {self.name}: requires lower < upper limit")
        com = np.asarray(self.com, dtype=float).reshape(3)
        axis.flags.writeable = False
        com.flags.writeable = False
        object.__setattr__(self, "axis", axis)
        object.__setattr__(self, "com", com)


@dataclass(frozen=True)
class RobotModel:
    """Two serial chains (left, right) sharing a torso root frame."""

    name: str
    torso: RigidTransform
    left: tuple[JointSpec, ...]
    right: tuple[JointSpec, ...]
    left_tip: RigidTransform = field(default_factory=RigidTransform.identity)
    right_tip: RigidTransform = field(default_factory=RigidTransform.identity)
    gravity: float = GRAVITY
    bodies: tuple = ()  # CollisionBody instances attached to link frames

    def __post_init__(self):
        names = [j.name for j in self.left] + [j.name for j in self.right]
        if len(set(names)) != len(names):
            raise ValueError("joint names must be unique across both chains")

    @property
    def dof(self) -> int:
        return len(self.left) + len(self.right)

    @property
    def joints(self) -> tuple[JointSpec, ...]:
        return self.left + self.right

    @property
    def joint_names(self) -> list[str]:
        return [j.name for j in self.joints]

    @property
    def lower_limits(self) -> np.ndarray:
        return np.array([j.lower for j in self.joints])

    @property
    def upper_limits(self) -> np.ndarray:
        return np.array([j.upper for j in self.joints])

    @property
    def frame_names(self) -> list[str]:
        return [TORSO_FRAME] + self.joint_names + [EEF_LEFT, EEF_RIGHT]

    def check_config(self, config) -> np.ndarray:
        q = np.asarray(config, dtype=float)
        if q.shape != (self.dof,):
            raise ConfigurationError(
                f"expected configuration of length {self.dof}, got shape {q.shape}"
            )
        if not np.all(np.isfinite(q)):
            raise ConfigurationError("configuration contains non-finite values")
        return q

    def within_limits(self, config, margin: float = 0.0) -> bool:
        q = self.check_config(config)
        return bool(
            np.all(q >= self.lower_limits + margin)
            and np.all(q <= self.upper_limits - margin)
        )


def forward_kinematics(model: RobotModel, config) -> dict[str, RigidTransform]:
    """World pose of every link frame plus both end-effector frames."""
    q = model.check_config(config)
    frames = {TORSO_FRAME: model.torso}
    offset = 0
    for chain, tip, eef in (
        (model.left, model.left_tip, EEF_LEFT),
        (model.right, model.right_tip, EEF_RIGHT),
    ):
        parent = model.torso
        for i, joint in enumerate(chain):
            pivot = parent @ joint.origin
            link = pivot @ RigidTransform(
                rotation_about_axis(joint.axis, q[offset + i])
            )
            frames[joint.name] = link
            parent = link
        frames[eef] = parent @ tip
        offset += len(chain)
    return frames


@dataclass(frozen=True)
class EndEffectorRelativePose:
    """Pose of the right end-effector expressed in the left end-effector
    frame: translation in meters, orientation as roll/pitch/yaw wrapped to
    (-pi, pi]. ``near_gimbal`` flags a degenerate rpy extraction."""

    translation: np.ndarray
    rpy: np.ndarray
    near_gimbal: bool = False


def relative_eef_pose(model: RobotModel, config) -> EndEffectorRelativePose:
    frames = forward_kinematics(model, config)
    rel = frames[EEF_LEFT].inverse() @ frames[EEF_RIGHT]
    cp = np.hypot(rel.rotation[0, 0], rel.rotation[1, 0])
    return EndEffectorRelativePose(
        translation=rel.translation.copy(),
        rpy=matrix_to_rpy(rel.rotation),
        near_gimbal=bool(cp < 1e-8),
    )


def static_gravity_torques(model: RobotModel, config) -> np.ndarray:
    """Gravity load per joint: the gradient of gravitational potential
    energy with respect to each joint angle (Nm). Positive torque means the
    actuator must push against gravity in the positive joint direction."""
    q = model.check_config(config)
    frames = forward_kinematics(model, config)
    g_vec = np.array([0.0, 0.0, -model.gravity])
    torques = np.zeros(model.dof)
    offset = 0
    for chain in (model.left, model.right):
        for k, joint_k in enumerate(chain):
            link = frames[joint_k.name]
            axis_w = link.rotation @ joint_k.axis
            pivot_w = link.translation
            tau = 0.0
            for joint_i in chain[k:]:
                if joint_i.mass == 0.0:
                    continue
                com_w = frames[joint_i.name].apply(joint_i.com)
                # dU/dtheta_k = m g_z . d(com)/dtheta_k, with g along -z
                tau -= joint_i.mass * g_vec @ np.cross(axis_w, com_w - pivot_w)
            torques[offset + k] = tau
        offset += len(chain)
    return torques


def arm_jacobian(model: RobotModel, config, side: str) -> np.ndarray:
    """Geometric Jacobian (6 x n) of one arm's end-effector; rows are linear
    velocity then angular velocity in the world frame."""
    frames = forward_kinematics(model, config)
    chain = model.left if side == "left" else model.right
    eef = frames[EEF_LEFT if side == "left" else EEF_RIGHT]
    jac = np.zeros((6, len(chain)))
    for k, joint in enumerate(chain):
        link = frames[joint.name]
        axis_w = link.rotation @ joint.axis
        jac[:3, k] = np.cross(axis_w, eef.translation - link.translation)
        jac[3:, k] = axis_w
    return jac


@dataclass(frozen=True)
class Trajectory:
    """N joint-space keyframes with immutable endpoints."""

    keyframes: np.ndarray

    def __post_init__(self):
        kf = np.ascontiguousarray(self.keyframes, dtype=float)
        if kf.ndim != 2 or kf.shape[0] < 2:
            raise ValueError("trajectory needs at least 2 keyframes of equal length")
        kf.flags.writeable = False
        object.__setattr__(self, "keyframes", kf)

    @property
    def n_keyframes(self) -> int:
        return self.keyframes.shape[0]

    @property
    def dof(self) -> int:
        return self.keyframes.shape[1]

    @property
    def start(self) -> np.ndarray:
        return self.keyframes[0]

    @property
    def goal(self) -> np.ndarray:
        return self.keyframes[-1]

    def with_interior(self, interior: np.ndarray) -> "Trajectory":
        """New trajectory with replaced interior keyframes; endpoints are
        carried over bit-exact."""
        interior = np.asarray(interior, dtype=float)
        if interior.shape != (self.n_keyframes - 2, self.dof):
            raise ValueError("interior block has wrong shape")
        kf = np.vstack([self.keyframes[:1], interior, self.keyframes[-1:]])
        return Trajectory(kf)

    def dense_samples(self, per_transition: int) -> np.ndarray:
        """Linear interpolation with ``per_transition`` samples inside every
        transition; includes all keyframes. Shape ((N-1)*(s+1)+1, J)."""
        alphas = np.linspace(0.0, 1.0, per_transition + 2)[:-1]
        segs = []
        for i in range(self.n_keyframes - 1):
            a, b = self.keyframes[i], self.keyframes[i + 1]
            segs.append(a + alphas[:, None] * (b - a))
        segs.append(self.keyframes[-1:])
        return np.vstack(segs)


def linear_seed(start, goal, n: int) -> Trajectory:
    """Linear interpolation from start to goal over ``n`` keyframes."""
    start = np.asarray(start, dtype=float)
    goal = np.asarray(goal, dtype=float)
    if start.shape != goal.shape or start.ndim != 1:
        raise ValueError("start and goal must be 1-d arrays of equal length")
    if n < 2:
        raise ValueError("a trajectory needs at least 2 keyframes")
    alphas = np.linspace(0.0, 1.0, n)[:, None]
    kf = start[None, :] + alphas * (goal[None, :] - start[None, :])
    kf[0] = start
    kf[-1] = goal
    return Trajectory(kf)


# ---------------------------------------------------------------------------
# Packed numeric form consumed by the batch kernels
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PackedModel:
    """Flat array view of a RobotModel for the batch kernels."""

    n_left: int
    axes: np.ndarray  # (J, 3)
    org_rot: np.ndarray  # (J, 3, 3)
    org_t: np.ndarray  # (J, 3)
    base_rot: np.ndarray  # (3, 3) torso
    base_t: np.ndarray  # (3,)
    tip_rot: np.ndarray  # (2, 3, 3) left, right
    tip_t: np.ndarray  # (2, 3)
    lower: np.ndarray  # (J,)
    upper: np.ndarray  # (J,)
    effort: np.ndarray  # (J,), inf when unlimited
    mass: np.ndarray  # (J,)
    com: np.ndarray  # (J, 3)
    gravity: float


_PACK_CACHE: dict[int, PackedModel] = {}


def pack_model(model: RobotModel) -> PackedModel:
    """Pack (and cache) the model's numeric data for kernel calls."""
    key = id(model)
    cached = _PACK_CACHE.get(key)
    if cached is not None:
        return cached
    joints = model.joints
    pack = PackedModel(
        n_left=len(model.left),
        axes=np.ascontiguousarray([j.axis for j in joints]),
        org_rot=np.ascontiguousarray([j.origin.rotation for j in joints]),
        org_t=np.ascontiguousarray([j.origin.translation for j in joints]),
        base_rot=np.ascontiguousarray(model.torso.rotation),
        base_t=np.ascontiguousarray(model.torso.translation),
        tip_rot=np.ascontiguousarray(
            [model.left_tip.rotation, model.right_tip.rotation]
        ),
        tip_t=np.ascontiguousarray(
            [model.left_tip.translation, model.right_tip.translation]
        ),
        lower=model.lower_limits,
        upper=model.upper_limits,
        effort=np.array(
            [j.effort if j.effort is not None else np.inf for j in joints]
        ),
        mass=np.array([j.mass for j in joints]),
        com=np.ascontiguousarray([j.com for j in joints]),
        gravity=model.gravity,
    )
    _PACK_CACHE[key] = pack
    return pack


# ---------------------------------------------------------------------------
# Robot description file
# ---------------------------------------------------------------------------


def _transform_from_entry(entry: dict) -> RigidTransform:
    return RigidTransform.from_rpy(
        entry.get("xyz", (0.0, 0.0, 0.0)), entry.get("rpy", (0.0, 0.0, 0.0))
    )


def _chain_from_entries(entries: list[dict]) -> tuple[JointSpec, ...]:
    joints = []
    for e in entries:
        joints.append(
            JointSpec(
                name=e["name"],
                axis=np.asarray(e["axis"], dtype=float),
                origin=_transform_from_entry(e),
                lower=float(e["limits"][0]),
                upper=float(e["limits"][1]),
                effort=float(e["effort"]) if "effort" in e else None,
                mass=float(e.get("mass", 0.0)),
                com=np.asarray(e.get("com", (0.0, 0.0, 0.0)), dtype=float),
            )
        )
    return tuple(joints)


def robot_from_dict(spec: dict) -> RobotModel:
    from .collision import body_from_dict  # deferred: collision imports us

    chains = spec["chains"]
    bodies = tuple(body_from_dict(b) for b in spec.get("collision", []))
    model = RobotModel(
        name=spec.get("name", "robot"),
        torso=_transform_from_entry(spec.get("torso", {})),
        left=_chain_from_entries(chains["left"]["joints"]),
        right=_chain_from_entries(chains["right"]["joints"]),
        left_tip=_transform_from_entry(chains["left"].get("tip", {})),
        right_tip=_transform_from_entry(chains["right"].get("tip", {})),
        gravity=float(spec.get("gravity", GRAVITY)),
        bodies=bodies,
    )
    frame_names = set(model.frame_names)
    for body in bodies:
        if body.attached_to not in frame_names:
            raise ValueError(f"collision body on unknown frame {body.attached_to!r}")
    return model


def load_robot(path) -> RobotModel:
    with open(path) as fh:
        return robot_from_dict(yaml.safe_load(fh))


def default_model() -> RobotModel:
    """The desk-scale 14-DOF dual-arm model shipped with the package."""
    from importlib.resources import files

    text = files("dualarm.data").joinpath("robots/desk_dual_arm.yaml").read_text()
    return robot_from_dict(yaml.safe_load(text))


def mirror_config(model: RobotModel, left_arm: np.ndarray) -> np.ndarray:
    """Build a full configuration from left-arm angles mirrored onto the
    right arm (sign-flipped yaw/roll axes). Only meaningful for the default
    model's joint layout."""
    signs = np.array([-1.0, 1.0, -1.0, 1.0, -1.0, 1.0, -1.0])
    return np.concatenate([left_arm, signs * left_arm])


def wrapped_rpy_difference(a, b) -> np.ndarray:
    """Componentwise wrapped difference a - b of two rpy triples."""
    return wrap_angle(np.asarray(a, dtype=float) - np.asarray(b, dtype=float))
