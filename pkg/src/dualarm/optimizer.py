"""Stochastic trajectory optimization over dual-arm joint space.

Rollouts perturb the interior keyframes with temporally smoothed noise, a
soft-min cost weighting combines them per keyframe, and the lowest-cost
valid trajectory seen so far is retained (keep-best elitism with restarts
from the linear seed after stagnation). Start and goal keyframes are never
modified.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .collision import Scene
from .costs import (
    ClosureReference,
    CostParams,
    TrajectoryCosts,
    TransitionEvaluator,
    orientation_deviation_cost,
    translation_deviation_cost,
)
from .kinematics import RobotModel, Trajectory, linear_seed
from .transforms import wrap_angle


class OptimizationError(RuntimeError):
    pass


@dataclass(frozen=True)
class OptimizerConfig:
    keyframes: int = 20
    rollouts: int = 16
    noise_std: float = 0.05  # rad, peak per-keyframe standard deviation
    noise_decay: float = 0.6  # applied whenever progress stalls
    noise_floor: float = 0.004
    anneal_after: int = 15  # stagnant iterations before the noise shrinks
    temperature: float = 0.21714724095162588  # 1/ln(100): best/worst ~ 100
    max_iterations: int = 300
    budget_s: float = 10.0
    convergence_window: int = 20
    convergence_threshold: float = 1e-3  # relative best-cost improvement
    restart_after: int = 60
    validation_samples: int = 20  # dense samples per transition
    seed: int = 0

    def __post_init__(self):
        if self.rollouts < 2:
            raise ValueError("need at least 2 rollouts per iteration")
        if self.keyframes < 3:
            raise ValueError("need at least 3 keyframes")
        if self.budget_s <= 0.0:
            raise ValueError("budget must be positive")

    def noise_at(self, anneal_level: int) -> float:
        return max(self.noise_std * self.noise_decay**anneal_level,
                   self.noise_floor)


def smoothing_matrix(n_interior: int) -> np.ndarray:
    """Inverse finite-difference-acceleration smoother for interior
    keyframe noise, scaled so the largest per-keyframe standard deviation
    of smoothed unit white noise is one."""
    if n_interior == 1:
        return np.ones((1, 1))
    a = (
        np.diag(np.full(n_interior, -2.0))
        + np.diag(np.ones(n_interior - 1), 1)
        + np.diag(np.ones(n_interior - 1), -1)
    )
    r_inv = np.linalg.inv(a.T @ a)
    stds = np.sqrt(np.einsum("ij,ij->i", r_inv, r_inv))
    return r_inv / stds.max()


def sample_rollouts(base: Trajectory, config: OptimizerConfig,
                    rng: np.random.Generator,
                    smoother: np.ndarray | None = None,
                    noise_std: float | None = None) -> list[Trajectory]:
    """K noisy copies of ``base``; only interior keyframes are perturbed
    and the perturbation is zero-mean and temporally smooth."""
    m = base.n_keyframes - 2
    if smoother is None:
        smoother = smoothing_matrix(m)
    std = config.noise_std if noise_std is None else noise_std
    z = rng.standard_normal((config.rollouts, m, base.dof))
    eps = std * np.einsum("ab,kbj->kaj", smoother, z)
    interior = base.keyframes[1:-1]
    return [base.with_interior(interior + eps[k]) for k in range(config.rollouts)]


def update(base: Trajectory, rollouts: list[Trajectory],
           rollout_costs: np.ndarray, config: OptimizerConfig) -> Trajectory:
    """Soft-min combination of the rollouts' interior keyframes.

    ``rollout_costs`` holds one local cost per rollout and interior
    keyframe (K, N-2); weights are positive, sum to one per keyframe and
    decrease monotonically with cost.
    """
    costs = np.asarray(rollout_costs, dtype=float)
    k, m = costs.shape
    if k != len(rollouts) or m != base.n_keyframes - 2:
        raise ValueError("rollout_costs must have shape (K, N-2)")
    finite = np.isfinite(costs)
    if not finite.all(axis=0).all():
        raise OptimizationError("every keyframe needs at least one finite rollout cost")
    cmin = costs.min(axis=0)
    span = costs.max(axis=0) - cmin
    safe_span = np.where(span > 1e-12, span, 1.0)
    w = np.where(
        span[None, :] > 1e-12,
        np.exp(-(costs - cmin[None, :]) / (config.temperature * safe_span[None, :])),
        1.0,
    )
    w /= w.sum(axis=0, keepdims=True)
    stacked = np.stack([r.keyframes[1:-1] for r in rollouts])  # (K, m, J)
    interior = np.einsum("km,kmj->mj", w, stacked)
    return base.with_interior(interior)


@dataclass
class ValidityReport:
    valid: bool
    messages: list[str] = field(default_factory=list)
    min_clearance: float = np.inf
    worst_pair: tuple[str, str] | None = None
    max_limit_violation: float = 0.0
    max_translation_deviation: float | None = None
    max_orientation_deviation: float | None = None
    max_target_orientation_deviation: float | None = None
    failing_transition: int | None = None
    translation_deviation_trace: np.ndarray | None = None
    orientation_deviation_trace: np.ndarray | None = None


def is_valid(trajectory: Trajectory, model: RobotModel, scene: Scene,
             params: CostParams, samples_per_transition: int = 20) -> ValidityReport:
    """Dense feasibility check: clearance, joint limits, and (when closure
    is enabled) per-sample closure deviations strictly below their maxima;
    fixed orientation targets are honored when configured. The closure
    reference is measured at the trajectory's first keyframe."""
    ref = (
        ClosureReference.capture(model, trajectory.start)
        if params.closure_enabled
        else None
    )
    evaluator = TransitionEvaluator(model, scene, params, ref)
    samples = trajectory.dense_samples(samples_per_transition)
    ev = evaluator.evaluate_samples(samples)
    per_tr = samples_per_transition + 1  # samples owned by each transition

    report = ValidityReport(valid=True)
    lower = model.lower_limits
    upper = model.upper_limits
    below = np.maximum(lower - samples, 0.0)
    above = np.maximum(samples - upper, 0.0)
    report.max_limit_violation = float(np.maximum(below, above).max())
    if report.max_limit_violation > 0.0:
        idx = int(np.argmax(np.maximum(below, above).max(axis=1)))
        report.valid = False
        report.failing_transition = min(
            idx // per_tr, trajectory.n_keyframes - 2
        )
        report.messages.append(
            f"joint limit violated by {report.max_limit_violation:.4f} rad "
            f"around transition {report.failing_transition}"
        )

    report.min_clearance = float(ev.min_clearance.min())
    if report.min_clearance < 0.0:
        idx = int(np.argmin(ev.min_clearance))
        pair_idx = int(np.argmin(ev.clearances[idx]))
        report.worst_pair = evaluator._scene_pack.pair_names[pair_idx]
        tr = min(idx // per_tr, trajectory.n_keyframes - 2)
        if report.failing_transition is None:
            report.failing_transition = tr
        report.valid = False
        report.messages.append(
            f"collision between {report.worst_pair[0]} and {report.worst_pair[1]} "
            f"(clearance {report.min_clearance:.4f} m) around transition {tr}"
        )

    if params.closure_enabled:
        report.translation_deviation_trace = ev.t_dev
        report.orientation_deviation_trace = ev.o_dev
        report.max_translation_deviation = float(ev.t_dev.max())
        report.max_orientation_deviation = float(ev.o_dev.max())
        if report.max_translation_deviation >= params.t_max:
            report.valid = False
            tr = min(int(np.argmax(ev.t_dev)) // per_tr, trajectory.n_keyframes - 2)
            report.messages.append(
                f"closure translation deviation {report.max_translation_deviation:.4f} m "
                f"reaches its maximum around transition {tr}"
            )
        if report.max_orientation_deviation >= params.o_max:
            report.valid = False
            tr = min(int(np.argmax(ev.o_dev)) // per_tr, trajectory.n_keyframes - 2)
            report.messages.append(
                f"closure orientation deviation {report.max_orientation_deviation:.4f} rad "
                f"reaches its maximum around transition {tr}"
            )

    if params.orientation_targets:
        worst = 0.0
        for idx, key in enumerate(("left", "right")):
            target = params.orientation_targets.get(key)
            if target is None:
                continue
            dev = np.abs(wrap_angle(ev.eef_rpy[:, idx] - target.rpy[None, :])).max(axis=1)
            excess = float((dev - target.tolerance).max())
            worst = max(worst, float(dev.max()))
            if excess > 0.0:
                report.valid = False
                report.messages.append(
                    f"{key} end-effector orientation deviates "
                    f"{float(dev.max()):.4f} rad from its fixed target"
                )
        report.max_target_orientation_deviation = worst
    return report


@dataclass
class OptimizationResult:
    trajectory: Trajectory
    success: bool
    wall_time_s: float
    iterations: int
    cost_history: list[float]
    term_totals: dict
    validity: ValidityReport
    first_valid_iteration: int | None = None
    restarts: int = 0

    def to_dict(self) -> dict:
        d = {
            "success": bool(self.success),
            "iterations": int(self.iterations),
            "restarts": int(self.restarts),
            "first_valid_iteration": self.first_valid_iteration,
            "cost_history": [float(c) for c in self.cost_history],
            "term_totals": {k: float(v) for k, v in self.term_totals.items()},
            "max_translation_deviation": self.validity.max_translation_deviation,
            "max_orientation_deviation": self.validity.max_orientation_deviation,
            "min_clearance": float(self.validity.min_clearance)
            if np.isfinite(self.validity.min_clearance)
            else None,
            "keyframes": self.trajectory.keyframes.tolist(),
            "timing": {"wall_time_s": float(self.wall_time_s)},
        }
        return d


def _screen_feasible(costs: TrajectoryCosts, params: CostParams) -> bool:
    """Cheap validity screen at the cost-sampling resolution; a dense
    is_valid confirmation still follows before a candidate is accepted."""
    ev = costs.samples
    if not bool(ev.limits_ok.all()):
        return False
    if float(ev.min_clearance.min()) < 0.0:
        return False
    if params.closure_enabled and ev.t_dev is not None:
        if float(ev.t_dev.max()) >= params.t_max:
            return False
        if float(ev.o_dev.max()) >= params.o_max:
            return False
    if float(costs.orientation.max(initial=0.0)) > 0.0:
        return False
    return True


def _local_keyframe_costs(totals: np.ndarray) -> np.ndarray:
    """Interior keyframe cost = sum of its two adjacent transition costs;
    totals has shape (K, N-1)."""
    return totals[:, :-1] + totals[:, 1:]


def optimize(model: RobotModel, scene: Scene, start, goal,
             cost_params: CostParams, opt_config: OptimizerConfig) -> OptimizationResult:
    """Optimize a dual-arm trajectory from ``start`` to ``goal``.

    Deterministic for a fixed seed as long as the wall-clock budget does not
    truncate the run (size max_iterations accordingly for reproducible
    benchmarks).
    """
    t0 = time.perf_counter()
    start = model.check_config(start)
    goal = model.check_config(goal)
    if not model.within_limits(start) or not model.within_limits(goal):
        raise ValueError("start and goal must lie within joint limits")

    ref = ClosureReference.capture(model, start)
    evaluator = TransitionEvaluator(model, scene, cost_params, ref)
    seed_traj = linear_seed(start, goal, opt_config.keyframes)

    endpoint_eval = evaluator.evaluate_samples(np.vstack([start, goal]))
    if float(endpoint_eval.min_clearance.min()) < 0.0:
        raise ValueError("start and goal must be collision-free")

    def dense_report(traj: Trajectory) -> ValidityReport:
        return is_valid(traj, model, scene, cost_params,
                        opt_config.validation_samples)

    def finish(best_traj, best_costs, success, report, iterations,
               first_valid, restarts, history) -> OptimizationResult:
        return OptimizationResult(
            trajectory=best_traj,
            success=success,
            wall_time_s=time.perf_counter() - t0,
            iterations=iterations,
            cost_history=history,
            term_totals=best_costs.term_totals(),
            validity=report,
            first_valid_iteration=first_valid,
            restarts=restarts,
        )

    seed_costs = evaluator.transition_costs(seed_traj.keyframes)
    if np.array_equal(start, goal):
        report = dense_report(seed_traj)
        return finish(seed_traj, seed_costs, report.valid, report, 0,
                      0 if report.valid else None, 0, [seed_costs.total])

    rng = np.random.default_rng(opt_config.seed)
    smoother = smoothing_matrix(opt_config.keyframes - 2)

    base = seed_traj
    best_traj, best_costs = seed_traj, seed_costs
    best_cost = seed_costs.total
    best_valid: tuple[float, Trajectory, TrajectoryCosts] | None = None
    first_valid: int | None = None
    restarts = 0
    last_improvement = 0
    history: list[float] = []

    if _screen_feasible(seed_costs, cost_params):
        report = dense_report(seed_traj)
        if report.valid:
            best_valid = (seed_costs.total, seed_traj, seed_costs)
            first_valid = 0

    base_costs = seed_costs
    anneal_level = 0
    iteration = 0
    for iteration in range(1, opt_config.max_iterations + 1):
        if time.perf_counter() - t0 > opt_config.budget_s:
            iteration -= 1
            break
        noisy = sample_rollouts(base, opt_config, rng, smoother,
                                opt_config.noise_at(anneal_level))
        noisy_costs = evaluator.transition_costs_batch(
            np.stack([r.keyframes for r in noisy])
        )
        # the base rides along as a zero-noise candidate: keyframes where no
        # rollout improves locally keep their current value
        rollouts = [base] + noisy
        rollout_costs = [base_costs] + noisy_costs
        totals_per_tr = np.stack([rc.totals for rc in rollout_costs])  # (K+1, T)
        new_base = update(base, rollouts, _local_keyframe_costs(totals_per_tr),
                          opt_config)
        new_costs = evaluator.transition_costs(new_base.keyframes)

        improved = False
        rollout_totals = totals_per_tr.sum(axis=1)
        k_best = int(np.argmin(rollout_totals))
        candidates = [
            (new_costs.total, new_base, new_costs),
            (float(rollout_totals[k_best]), rollouts[k_best], rollout_costs[k_best]),
        ]
        for cost, traj, costs in candidates:
            if cost < best_cost:
                improved = True
                best_cost, best_traj, best_costs = cost, traj, costs
            if _screen_feasible(costs, cost_params) and (
                best_valid is None or cost < best_valid[0]
            ):
                report = dense_report(traj)
                if report.valid:
                    if best_valid is None:
                        first_valid = iteration
                    best_valid = (cost, traj, costs)
        if improved:
            last_improvement = iteration

        stagnant = iteration - last_improvement
        if best_valid is not None and stagnant >= opt_config.convergence_window:
            history.append(best_cost)
            break
        if best_valid is None and stagnant >= opt_config.restart_after:
            base, base_costs = seed_traj, seed_costs
            restarts += 1
            anneal_level = 0
            last_improvement = iteration
        else:
            if stagnant > 0 and stagnant % opt_config.anneal_after == 0:
                anneal_level += 1
            if new_costs.total <= base_costs.total:
                base, base_costs = new_base, new_costs
        history.append(best_cost)

    if best_valid is not None:
        cost, traj, costs = best_valid
        report = dense_report(traj)
        return finish(traj, costs, report.valid, report, iteration,
                      first_valid, restarts, history)
    report = dense_report(best_traj)
    return finish(best_traj, best_costs, False, report, iteration,
                  None, restarts, history)
