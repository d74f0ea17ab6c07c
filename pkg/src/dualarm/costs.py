"""Six-term transition cost for dual-arm trajectories.

A transition between consecutive keyframes is scored by collision,
joint-limit, end-effector orientation, duration and torque terms plus a
kinematic-chain closure term that keeps the relative end-effector pose at
its initial value. The closure term is piecewise: proportional to the
deviation while below the allowed maximum, and boosted by a large penalty
factor once the maximum is breached.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from . import _kernels as kernels
from .collision import Scene, pack_scene
from .kinematics import RobotModel, pack_model, relative_eef_pose
from .transforms import wrap_angle

EEF_KEYS = ("left", "right")


@dataclass(frozen=True)
class OrientationTarget:
    """Fixed world roll/pitch/yaw an end-effector must hold, with a
    tolerance below which no cost accrues."""

    rpy: np.ndarray
    tolerance: float = 0.1

    def __post_init__(self):
        rpy = np.asarray(self.rpy, dtype=float).reshape(3)
        rpy.flags.writeable = False
        object.__setattr__(self, "rpy", rpy)


@dataclass(frozen=True)
class CostParams:
    """Constants and weights for all six transition-cost terms."""

    t_max: float = 0.01  # m, allowed translation deviation between eefs
    o_max: float = 0.05  # rad, allowed orientation deviation between eefs
    translation_penalty_factor: float = 1000.0
    orientation_penalty_factor: float = 1000.0
    closure_enabled: bool = False
    clearance_margin: float = 0.03  # m, obstacle cost activates below this
    penetration_clamp: float = 0.05  # m, caps penetration depth in the cost
    penetration_penalty: float = 25.0  # keeps collisions above any path saving
    transition_samples: int = 4  # interior evaluation points per transition
    weight_collision: float = 1.0
    weight_limits: float = 1.0
    weight_orientation: float = 1.0
    weight_duration: float = 1.0
    weight_torque: float = 0.1
    limit_scale: float = 0.05  # rad, normalizes limit/orientation hinges
    orientation_targets: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.t_max <= 0.0 or self.o_max <= 0.0:
            raise ValueError("deviation maxima must be positive")
        if self.translation_penalty_factor <= 1.0 or self.orientation_penalty_factor <= 1.0:
            raise ValueError("penalty factors must exceed 1")
        if self.transition_samples < 0:
            raise ValueError("transition_samples must be nonnegative")

    def with_closure(self, enabled: bool) -> "CostParams":
        return replace(self, closure_enabled=enabled)


@dataclass(frozen=True)
class ClosureReference:
    """Relative end-effector pose captured once from the trajectory's first
    configuration."""

    t_desired: np.ndarray
    o_desired: np.ndarray

    def __post_init__(self):
        for name in ("t_desired", "o_desired"):
            v = np.asarray(getattr(self, name), dtype=float).reshape(3)
            v.flags.writeable = False
            object.__setattr__(self, name, v)

    @classmethod
    def capture(cls, model: RobotModel, config) -> "ClosureReference":
        rel = relative_eef_pose(model, config)
        return cls(t_desired=rel.translation, o_desired=rel.rpy)


@dataclass(frozen=True)
class ClosureDeviation:
    """Componentwise deviation from the closure reference plus the largest
    components used by the cost branches."""

    delta_t: np.ndarray
    t_dev: float
    delta_o: np.ndarray
    o_dev: float


def closure_deviation(model: RobotModel, config, ref: ClosureReference) -> ClosureDeviation:
    rel = relative_eef_pose(model, config)
    delta_t = np.abs(ref.t_desired - rel.translation)
    delta_o = np.abs(wrap_angle(ref.o_desired - rel.rpy))
    return ClosureDeviation(
        delta_t=delta_t,
        t_dev=float(delta_t.max()),
        delta_o=delta_o,
        o_dev=float(delta_o.max()),
    )


def translation_deviation_cost(t_dev, params: CostParams):
    """Piecewise translation term: t_dev/t_max below the maximum, penalty
    branch at or above it. Vectorizes over arrays."""
    t_dev = np.asarray(t_dev, dtype=float)
    c = params.translation_penalty_factor
    out = np.where(t_dev >= params.t_max, c + c * t_dev, t_dev / params.t_max)
    return float(out) if out.ndim == 0 else out


def orientation_deviation_cost(o_dev, params: CostParams):
    """Piecewise orientation term, same structure as the translation one."""
    o_dev = np.asarray(o_dev, dtype=float)
    c = params.orientation_penalty_factor
    out = np.where(o_dev >= params.o_max, c + c * o_dev, o_dev / params.o_max)
    return float(out) if out.ndim == 0 else out


def translation_cost(model: RobotModel, config, ref: ClosureReference,
                     params: CostParams) -> float:
    dev = closure_deviation(model, config, ref)
    return float(translation_deviation_cost(dev.t_dev, params))


def orientation_cost(model: RobotModel, config, ref: ClosureReference,
                     params: CostParams) -> float:
    dev = closure_deviation(model, config, ref)
    return float(orientation_deviation_cost(dev.o_dev, params))


@dataclass(frozen=True)
class TransitionCost:
    """Per-term breakdown of one transition's cost."""

    orientation: float
    limits: float
    collision: float
    duration: float
    torque: float
    closure: float

    @property
    def total(self) -> float:
        return (self.orientation + self.limits + self.collision
                + self.duration + self.torque + self.closure)

    def as_dict(self) -> dict:
        return {
            "orientation": self.orientation,
            "limits": self.limits,
            "collision": self.collision,
            "duration": self.duration,
            "torque": self.torque,
            "closure": self.closure,
            "total": self.total,
        }


def transition_alphas(params: CostParams) -> np.ndarray:
    return np.linspace(0.0, 1.0, params.transition_samples + 2)


@dataclass
class SampleEval:
    """Raw per-configuration quantities shared by all cost terms."""

    rel_t: np.ndarray  # (B, 3)
    rel_rpy: np.ndarray  # (B, 3)
    eef_rpy: np.ndarray | None  # (B, 2, 3), only when orientation targets exist
    clearances: np.ndarray  # (B, n_pairs)
    limit_excess: np.ndarray  # (B,) sum of squared normalized violations
    torque_excess: np.ndarray  # (B,) sum of squared relative overloads
    min_clearance: np.ndarray  # (B,)
    limits_ok: np.ndarray  # (B,) bool
    t_dev: np.ndarray | None = None  # (B,) when a closure reference is set
    o_dev: np.ndarray | None = None

    def slice(self, lo: int, hi: int) -> "SampleEval":
        """View of one sub-batch (no copies)."""
        return SampleEval(
            rel_t=self.rel_t[lo:hi],
            rel_rpy=self.rel_rpy[lo:hi],
            eef_rpy=None if self.eef_rpy is None else self.eef_rpy[lo:hi],
            clearances=self.clearances[lo:hi],
            limit_excess=self.limit_excess[lo:hi],
            torque_excess=self.torque_excess[lo:hi],
            min_clearance=self.min_clearance[lo:hi],
            limits_ok=self.limits_ok[lo:hi],
            t_dev=None if self.t_dev is None else self.t_dev[lo:hi],
            o_dev=None if self.o_dev is None else self.o_dev[lo:hi],
        )


class TransitionEvaluator:
    """Batched cost evaluation bound to one model/scene/params triple.

    All heavy work happens in the kernel backend; the evaluator itself is
    stateless between calls and safe to reuse across trajectories.
    """

    def __init__(self, model: RobotModel, scene: Scene, params: CostParams,
                 reference: ClosureReference | None = None):
        self.model = model
        self.scene = scene
        self.params = params
        self.reference = reference
        self._pack = pack_model(model)
        self._scene_pack = pack_scene(model, scene)
        self._need_torque = params.weight_torque > 0.0 and np.any(
            np.isfinite(self._pack.effort)
        )

    def evaluate_samples(self, configs: np.ndarray) -> SampleEval:
        q = np.ascontiguousarray(configs, dtype=float)
        pack = self._pack
        link_rot, link_t, eef_rot, eef_t = kernels.fk_frames(
            pack.axes, pack.org_rot, pack.org_t, pack.base_rot, pack.base_t,
            pack.tip_rot, pack.tip_t, pack.n_left, q,
        )
        rel_t, rel_rpy = kernels.relative_pose_batch(eef_rot, eef_t)
        if self.params.orientation_targets:
            eef_rpy = np.stack(
                [kernels.rpy_batch(eef_rot[:, 0]), kernels.rpy_batch(eef_rot[:, 1])],
                axis=1,
            )
        else:
            eef_rpy = None
        sp = self._scene_pack
        if sp.pairs.shape[0] > 0:
            clearances = kernels.pair_distances(
                sp.kind, sp.attach, sp.pa, sp.pb, sp.brot, sp.size, sp.pairs,
                link_rot, link_t, pack.base_rot, pack.base_t,
            )
            min_clear = clearances.min(axis=1)
        else:
            clearances = np.empty((q.shape[0], 0))
            min_clear = np.full(q.shape[0], np.inf)

        below = np.maximum(pack.lower - q, 0.0)
        above = np.maximum(q - pack.upper, 0.0)
        viol = (below + above) / self.params.limit_scale
        limit_excess = np.einsum("bj,bj->b", viol, viol)
        limits_ok = ~np.any((below > 0.0) | (above > 0.0), axis=1)

        if self._need_torque:
            torques = kernels.gravity_torques_batch(pack, link_rot, link_t)
            over = np.maximum(np.abs(torques) / pack.effort - 1.0, 0.0)
            torque_excess = np.einsum("bj,bj->b", over, over)
        else:
            torque_excess = np.zeros(q.shape[0])

        ev = SampleEval(
            rel_t=rel_t,
            rel_rpy=rel_rpy,
            eef_rpy=eef_rpy,
            clearances=clearances,
            limit_excess=limit_excess,
            torque_excess=torque_excess,
            min_clearance=min_clear,
            limits_ok=limits_ok,
        )
        if self.reference is not None:
            ev.t_dev = np.abs(ref_minus(self.reference.t_desired, rel_t)).max(axis=1)
            ev.o_dev = np.abs(
                wrap_angle(self.reference.o_desired[None, :] - rel_rpy)
            ).max(axis=1)
        return ev

    def _collision_hinge(self, clearances: np.ndarray) -> np.ndarray:
        """Per-pair proximity cost in [0, 1] below the margin plus a
        dominating penalty once the pair actually penetrates."""
        p = self.params
        if clearances.shape[1] == 0:
            return np.zeros(clearances.shape[0])
        proximity = (
            np.maximum(p.clearance_margin - np.maximum(clearances, 0.0), 0.0)
            / p.clearance_margin
        )
        depth = np.minimum(np.maximum(-clearances, 0.0), p.penetration_clamp)
        penetration = np.where(
            clearances < 0.0,
            p.penetration_penalty * (1.0 + depth / p.penetration_clamp),
            0.0,
        )
        return (proximity + penetration).sum(axis=1)

    def _orientation_hinge(self, eef_rpy: np.ndarray | None, batch: int) -> np.ndarray:
        p = self.params
        out = np.zeros(batch)
        if eef_rpy is None:
            return out
        for idx, key in enumerate(EEF_KEYS):
            target = p.orientation_targets.get(key)
            if target is None:
                continue
            dev = np.abs(wrap_angle(eef_rpy[:, idx] - target.rpy[None, :])).max(axis=1)
            excess = np.maximum(dev - target.tolerance, 0.0) / p.limit_scale
            out += excess * excess
        return out

    def transition_costs(self, keyframes: np.ndarray) -> "TrajectoryCosts":
        """Evaluate all transitions of a keyframe matrix (N, J) at the
        configured sampling resolution."""
        kf = np.asarray(keyframes, dtype=float)
        return self.transition_costs_batch(kf[None, :, :])[0]

    def transition_costs_batch(self, stacked: np.ndarray) -> list["TrajectoryCosts"]:
        """Evaluate several trajectories (K, N, J) in one kernel pass; the
        returned per-trajectory costs hold views into the shared batch."""
        p = self.params
        stacked = np.asarray(stacked, dtype=float)
        k, n, dof = stacked.shape
        n_tr = n - 1
        alphas = transition_alphas(p)
        s = alphas.shape[0]
        diffs = stacked[:, 1:] - stacked[:, :-1]  # (K, T, J)
        segs = (
            stacked[:, :-1, None, :]
            + alphas[None, None, :, None] * diffs[:, :, None, :]
        )
        ev = self.evaluate_samples(segs.reshape(-1, dof))

        # additive terms average over the transition's samples (an integral
        # along the transition: every improving sample lowers the cost);
        # the closure term keeps its max-over-samples semantics
        def per_transition_mean(values: np.ndarray) -> np.ndarray:
            return values.reshape(k, n_tr, s).mean(axis=2)

        collision = p.weight_collision * per_transition_mean(
            self._collision_hinge(ev.clearances)
        )
        limits = p.weight_limits * per_transition_mean(ev.limit_excess)
        orientation = p.weight_orientation * per_transition_mean(
            self._orientation_hinge(ev.eef_rpy, ev.rel_t.shape[0])
        )
        torque = p.weight_torque * per_transition_mean(ev.torque_excess)
        duration = p.weight_duration * np.linalg.norm(diffs, axis=2)  # (K, T)
        if p.closure_enabled and self.reference is not None:
            q_t = translation_deviation_cost(ev.t_dev, p).reshape(k, n_tr, s)
            q_o = orientation_deviation_cost(ev.o_dev, p).reshape(k, n_tr, s)
            closure = 0.5 * q_t.max(axis=2) + 0.5 * q_o.max(axis=2)
        else:
            closure = np.zeros((k, n_tr))
        block = n_tr * s
        return [
            TrajectoryCosts(
                orientation=orientation[i],
                limits=limits[i],
                collision=collision[i],
                duration=duration[i],
                torque=torque[i],
                closure=closure[i],
                samples=ev.slice(i * block, (i + 1) * block),
                n_transitions=n_tr,
                samples_per_transition=s,
            )
            for i in range(k)
        ]


def ref_minus(reference: np.ndarray, values: np.ndarray) -> np.ndarray:
    return reference[None, :] - values


@dataclass
class TrajectoryCosts:
    """Vector of per-transition term values for a whole trajectory."""

    orientation: np.ndarray
    limits: np.ndarray
    collision: np.ndarray
    duration: np.ndarray
    torque: np.ndarray
    closure: np.ndarray
    samples: SampleEval
    n_transitions: int
    samples_per_transition: int

    @property
    def totals(self) -> np.ndarray:
        return (self.orientation + self.limits + self.collision
                + self.duration + self.torque + self.closure)

    @property
    def total(self) -> float:
        return float(self.totals.sum())

    def transition(self, index: int) -> TransitionCost:
        return TransitionCost(
            orientation=float(self.orientation[index]),
            limits=float(self.limits[index]),
            collision=float(self.collision[index]),
            duration=float(self.duration[index]),
            torque=float(self.torque[index]),
            closure=float(self.closure[index]),
        )

    def term_totals(self) -> dict:
        return {
            "orientation": float(self.orientation.sum()),
            "limits": float(self.limits.sum()),
            "collision": float(self.collision.sum()),
            "duration": float(self.duration.sum()),
            "torque": float(self.torque.sum()),
            "closure": float(self.closure.sum()),
            "total": self.total,
        }


def closure_cost(model: RobotModel, theta_i, theta_i1, ref: ClosureReference,
                 params: CostParams) -> float:
    """Closure term of one transition: the equal-weight average of the worst
    translation and worst orientation deviation costs over the transition's
    evaluated configurations."""
    alphas = transition_alphas(params)
    theta_i = np.asarray(theta_i, dtype=float)
    theta_i1 = np.asarray(theta_i1, dtype=float)
    best_t = -np.inf
    best_o = -np.inf
    for a in alphas:
        dev = closure_deviation(model, theta_i + a * (theta_i1 - theta_i), ref)
        best_t = max(best_t, translation_deviation_cost(dev.t_dev, params))
        best_o = max(best_o, orientation_deviation_cost(dev.o_dev, params))
    return 0.5 * best_t + 0.5 * best_o


def transition_cost(model: RobotModel, scene: Scene, theta_i, theta_i1,
                    ref: ClosureReference | None, params: CostParams) -> TransitionCost:
    """All six terms for a single transition. For hot loops construct a
    :class:`TransitionEvaluator` once and batch whole trajectories instead."""
    evaluator = TransitionEvaluator(model, scene, params, ref)
    kf = np.vstack([np.asarray(theta_i, dtype=float), np.asarray(theta_i1, dtype=float)])
    return evaluator.transition_costs(kf).transition(0)


def trajectory_cost(model: RobotModel, scene: Scene, keyframes,
                    ref: ClosureReference | None, params: CostParams) -> float:
    """Total trajectory cost: the sum of consecutive transition costs."""
    evaluator = TransitionEvaluator(model, scene, params, ref)
    return evaluator.transition_costs(np.asarray(keyframes, dtype=float)).total
