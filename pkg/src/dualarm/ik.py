"""Damped-least-squares inverse kinematics for one arm and goal-resolution
for both arms jointly.

Used by the pipeline to turn warped pre-grasp poses into joint-space goal
configurations; the optimizer itself never calls IK.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .collision import Scene, min_clearance
from .kinematics import EEF_LEFT, EEF_RIGHT, RobotModel, arm_jacobian, forward_kinematics
from .transforms import RigidTransform, rotation_log


class GoalResolutionError(RuntimeError):
    """Target end-effector poses could not be reached."""


@dataclass(frozen=True)
class IKParams:
    max_iterations: int = 200
    damping: float = 0.05
    step_clip: float = 0.3  # rad per joint per iteration
    position_tolerance: float = 0.005  # m
    orientation_tolerance: float = 0.02  # rad
    restarts: int = 8
    restart_spread: float = 0.6  # rad, uniform seed perturbation
    preferred_clearance: float = 0.02  # m, stop searching once this is met
    limit_margin: float = 1e-6


def _pose_error(current: RigidTransform, target: RigidTransform) -> np.ndarray:
    pos = target.translation - current.translation
    rot = rotation_log(target.rotation @ current.rotation.T)
    return np.concatenate([pos, rot])


def solve_arm_ik(model: RobotModel, side: str, target: RigidTransform,
                 seed: np.ndarray, params: IKParams = IKParams()) -> tuple[np.ndarray, bool]:
    """DLS iteration for one arm; the other arm's joints are left at the
    seed. Returns (full configuration, converged)."""
    q = np.asarray(seed, dtype=float).copy()
    nl = len(model.left)
    sl = slice(0, nl) if side == "left" else slice(nl, model.dof)
    eef = EEF_LEFT if side == "left" else EEF_RIGHT
    lam2 = params.damping * params.damping
    lower, upper = model.lower_limits, model.upper_limits
    for _ in range(params.max_iterations):
        frames = forward_kinematics(model, q)
        err = _pose_error(frames[eef], target)
        if (np.linalg.norm(err[:3]) < params.position_tolerance
                and np.linalg.norm(err[3:]) < params.orientation_tolerance):
            return q, True
        jac = arm_jacobian(model, q, side)
        jjt = jac @ jac.T + lam2 * np.eye(6)
        dq = jac.T @ np.linalg.solve(jjt, err)
        dq = np.clip(dq, -params.step_clip, params.step_clip)
        q[sl] = np.clip(q[sl] + dq, lower[sl] + params.limit_margin,
                        upper[sl] - params.limit_margin)
    frames = forward_kinematics(model, q)
    err = _pose_error(frames[eef], target)
    ok = (np.linalg.norm(err[:3]) < params.position_tolerance
          and np.linalg.norm(err[3:]) < params.orientation_tolerance)
    return q, bool(ok)


def resolve_goal_configuration(model: RobotModel, scene: Scene,
                               left_pose: RigidTransform, right_pose: RigidTransform,
                               seed_config, params: IKParams = IKParams(),
                               rng_seed: int = 0) -> np.ndarray:
    """Joint configuration whose end-effectors reach the two target poses,
    within limits and collision-free; restarts from perturbed seeds before
    giving up."""
    seed = model.check_config(seed_config)
    rng = np.random.default_rng(rng_seed)
    nl = len(model.left)
    last_failure = "did not converge"
    fallback: np.ndarray | None = None
    fallback_clearance = -np.inf
    for attempt in range(params.restarts + 1):
        trial_seed = seed.copy()
        if attempt > 0:
            trial_seed = np.clip(
                seed + rng.uniform(-params.restart_spread, params.restart_spread,
                                   size=seed.shape),
                model.lower_limits + params.limit_margin,
                model.upper_limits - params.limit_margin,
            )
        q_left, ok_left = solve_arm_ik(model, "left", left_pose, trial_seed, params)
        if not ok_left:
            last_failure = "left arm did not reach its target pose"
            continue
        merged = trial_seed.copy()
        merged[:nl] = q_left[:nl]
        q_full, ok_right = solve_arm_ik(model, "right", right_pose, merged, params)
        if not ok_right:
            last_failure = "right arm did not reach its target pose"
            continue
        if not model.within_limits(q_full):
            last_failure = "solution violates joint limits"
            continue
        clearance, pair = min_clearance(model, scene, q_full)
        if clearance < 0.0:
            last_failure = f"solution collides ({pair[0]} vs {pair[1]})"
            continue
        if clearance >= params.preferred_clearance:
            return q_full
        if clearance > fallback_clearance:
            fallback, fallback_clearance = q_full, clearance
    if fallback is not None:
        return fallback
    raise GoalResolutionError(last_failure)
