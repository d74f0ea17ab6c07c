"""End-to-end benchmark harness.

Three experiment modes mirror the evaluation structure: a seeded
with/without-closure lift comparison, a bar lift that additionally pins
both end-effector orientations, and a full pick pipeline (pose estimation,
latent shape inference, grasp warping, goal resolution, trajectory
optimization) on synthetic category instances.

Reports are JSON-ready dicts with a stable schema; every wall-clock-derived
value lives under a ``timing`` key so reruns with identical seeds are
byte-identical after :func:`strip_timing`.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
import yaml

from .collision import Scene, load_scene
from .costs import ClosureReference, CostParams, OrientationTarget, closure_deviation
from .ik import GoalResolutionError, IKParams, resolve_goal_configuration
from .kinematics import RobotModel, Trajectory, forward_kinematics, load_robot
from .optimizer import OptimizerConfig, is_valid, optimize
from .shapespace import (
    GraspSet,
    PointCloud,
    build_shape_space,
    estimate_initial_pose,
    grasps_from_dict,
    infer_latent,
    load_cloud,
    load_grasps,
    load_space,
    reconstruct,
    save_space,
    warp_grasp_set,
)
from .shapespace.cpd import CPDParams
from .transforms import RigidTransform, rotation_about_axis, wrap_angle

REPORT_SCHEMA = "dualarm-report/1"
MODES = ("lift-comparison", "bar-lift", "pick")


class ScenarioError(ValueError):
    pass


@dataclass(frozen=True)
class Scenario:
    """Parsed experiment description; all paths resolved and checked."""

    mode: str
    robot_path: Path
    scene_path: Path
    start_config: np.ndarray
    goal_config: np.ndarray | None = None
    trials: int = 5
    base_seed: int = 0
    optimizer: dict = field(default_factory=dict)
    costs: dict = field(default_factory=dict)
    orientation_tolerance: float = 0.1
    # pick-specific
    category_dir: Path | None = None
    shape_space_path: Path | None = None
    observations: tuple[str, ...] = ()
    object_position: np.ndarray | None = None
    object_rotations: tuple[float, ...] = (0.25, 0.0, -0.25)
    yaw_noise: float = 0.2
    observation_noise: float = 0.001
    n_components: int = 8
    grasp_position_tolerance: float = 0.025
    grasp_orientation_tolerance: float = 0.35

    def load_model(self) -> RobotModel:
        return load_robot(self.robot_path)

    def load_scene(self) -> Scene:
        return load_scene(self.scene_path)


def _resolve(base: Path, value: str) -> Path:
    path = Path(value)
    if not path.is_absolute():
        path = (base / path).resolve()
    if not path.exists():
        raise ScenarioError(f"referenced file does not exist: {path}")
    return path


def load_scenario(path, overrides: dict | None = None) -> Scenario:
    path = Path(path)
    with open(path) as fh:
        spec = yaml.safe_load(fh)
    if overrides:
        spec.update({k: v for k, v in overrides.items() if v is not None})
    base = path.parent
    mode = spec.get("mode")
    if mode not in MODES:
        raise ScenarioError(f"unknown scenario mode {mode!r}")
    trials = int(spec.get("trials", 5))
    if trials < 1:
        raise ScenarioError("trial count must be at least 1")

    category_dir = None
    space_path = None
    observations = tuple(spec.get("observations", ()))
    object_position = None
    if mode == "pick":
        if "category" not in spec:
            raise ScenarioError("pick scenarios need a category directory")
        category_dir = _resolve(base, spec["category"])
        if "shape_space" in spec and spec["shape_space"]:
            space_path = _resolve(base, spec["shape_space"])
        if not observations:
            raise ScenarioError("pick scenarios need observation cloud files")
        for name in observations:
            _resolve(category_dir, name)
        object_position = np.asarray(spec.get("object_position", (0.55, 0.0, 0.0)),
                                     dtype=float)

    goal = spec.get("goal_config")
    return Scenario(
        mode=mode,
        robot_path=_resolve(base, spec["robot"]),
        scene_path=_resolve(base, spec["scene"]),
        start_config=np.asarray(spec["start_config"], dtype=float),
        goal_config=None if goal is None else np.asarray(goal, dtype=float),
        trials=trials,
        base_seed=int(spec.get("base_seed", 0)),
        optimizer=dict(spec.get("optimizer", {})),
        costs=dict(spec.get("costs", {})),
        orientation_tolerance=float(spec.get("orientation_tolerance", 0.1)),
        category_dir=category_dir,
        shape_space_path=space_path,
        observations=observations,
        object_position=object_position,
        object_rotations=tuple(spec.get("object_rotations", (0.25, 0.0, -0.25))),
        yaw_noise=float(spec.get("yaw_noise", 0.2)),
        observation_noise=float(spec.get("observation_noise", 0.001)),
        n_components=int(spec.get("components", 8)),
        grasp_position_tolerance=float(spec.get("grasp_position_tolerance", 0.025)),
        grasp_orientation_tolerance=float(
            spec.get("grasp_orientation_tolerance", 0.35)
        ),
    )


def scenario_cost_params(scenario: Scenario, **extra) -> CostParams:
    kwargs = dict(scenario.costs)
    kwargs.update(extra)
    return CostParams(**kwargs)


def scenario_optimizer_config(scenario: Scenario, seed: int, **extra) -> OptimizerConfig:
    kwargs = dict(scenario.optimizer)
    kwargs.update(extra)
    return OptimizerConfig(seed=seed, **kwargs)


# ---------------------------------------------------------------------------
# Report helpers
# ---------------------------------------------------------------------------


def strip_timing(obj):
    """Recursive copy with every ``timing`` subtree removed; what is left
    must be bit-reproducible for fixed seeds."""
    if isinstance(obj, dict):
        return {k: strip_timing(v) for k, v in obj.items() if k != "timing"}
    if isinstance(obj, list):
        return [strip_timing(v) for v in obj]
    return obj


def dump_report(report: dict) -> str:
    return json.dumps(report, indent=2, sort_keys=True) + "\n"


def write_report(path, report: dict):
    Path(path).write_text(dump_report(report))


def _mean_std(values) -> dict:
    arr = np.asarray(list(values), dtype=float)
    if arr.size == 0:
        return {"mean_s": None, "std_s": None}
    return {"mean_s": float(arr.mean()), "std_s": float(arr.std())}


def _optimization_trial_record(index: int, seed: int, result) -> dict:
    record = {
        "index": index,
        "seed": seed,
        "success": bool(result.success),
        "iterations": int(result.iterations),
        "restarts": int(result.restarts),
        "first_valid_iteration": result.first_valid_iteration,
        "final_cost": float(result.cost_history[-1]) if result.cost_history else None,
        "term_totals": {k: float(v) for k, v in result.term_totals.items()},
        "max_translation_deviation_m": result.validity.max_translation_deviation,
        "max_orientation_deviation_rad": result.validity.max_orientation_deviation,
        "min_clearance_m": None
        if not np.isfinite(result.validity.min_clearance)
        else float(result.validity.min_clearance),
        "keyframes": result.trajectory.keyframes.tolist(),
        "timing": {"runtime_s": float(result.wall_time_s)},
    }
    if result.validity.translation_deviation_trace is not None and result.success:
        record["deviation_trace"] = {
            "translation_m": [float(v) for v in result.validity.translation_deviation_trace],
            "orientation_rad": [float(v) for v in result.validity.orientation_deviation_trace],
        }
    return record


def aggregate_optimization_trials(trials: list[dict]) -> dict:
    n = len(trials)
    successes = [t for t in trials if t["success"]]
    return {
        "trials": n,
        "successes": len(successes),
        "success_rate": len(successes) / n if n else None,
        "mean_iterations": float(np.mean([t["iterations"] for t in trials])) if n else None,
        "timing": _mean_std(t["timing"]["runtime_s"] for t in trials),
    }


# ---------------------------------------------------------------------------
# Lift comparison and bar lift
# ---------------------------------------------------------------------------


def _run_optimization_mode(scenario: Scenario, model: RobotModel, scene: Scene,
                           params: CostParams, label: str) -> dict:
    if scenario.goal_config is None:
        raise ScenarioError(f"{scenario.mode} scenarios need a goal_config")
    trials = []
    for i in range(scenario.trials):
        seed = scenario.base_seed + i
        config = scenario_optimizer_config(scenario, seed)
        result = optimize(model, scene, scenario.start_config,
                          scenario.goal_config, params, config)
        trials.append(_optimization_trial_record(i, seed, result))
    return {
        "label": label,
        "trials": trials,
        "aggregates": aggregate_optimization_trials(trials),
    }


def run_lift_comparison(scenario: Scenario) -> dict:
    """Seeded with/without-closure comparison on one start/goal pair."""
    model = scenario.load_model()
    scene = scenario.load_scene()
    disabled = _run_optimization_mode(
        scenario, model, scene, scenario_cost_params(scenario, closure_enabled=False),
        "closure_disabled",
    )
    enabled = _run_optimization_mode(
        scenario, model, scene, scenario_cost_params(scenario, closure_enabled=True),
        "closure_enabled",
    )
    mean_off = disabled["aggregates"]["timing"]["mean_s"]
    mean_on = enabled["aggregates"]["timing"]["mean_s"]
    growth = None
    if mean_off and mean_on:
        growth = 100.0 * (mean_on - mean_off) / mean_off
    return {
        "schema": REPORT_SCHEMA,
        "mode": "lift-comparison",
        "modes": {"closure_disabled": disabled, "closure_enabled": enabled},
        "timing": {"runtime_growth_pct": growth},
    }


def run_bar_lift(scenario: Scenario) -> dict:
    """Closure plus fixed end-effector orientations throughout the lift."""
    model = scenario.load_model()
    scene = scenario.load_scene()
    frames = forward_kinematics(model, scenario.start_config)
    targets = {
        "left": OrientationTarget(frames["eef_left"].rpy(),
                                  scenario.orientation_tolerance),
        "right": OrientationTarget(frames["eef_right"].rpy(),
                                   scenario.orientation_tolerance),
    }
    params = scenario_cost_params(scenario, closure_enabled=True,
                                  orientation_targets=targets)
    block = _run_optimization_mode(scenario, model, scene, params, "bar_lift")
    return {
        "schema": REPORT_SCHEMA,
        "mode": "bar-lift",
        "orientation_tolerance_rad": scenario.orientation_tolerance,
        "modes": {"bar_lift": block},
    }


def run_optimize_single(scenario: Scenario, closure: bool, seed: int,
                        budget_s: float | None = None) -> dict:
    """One seeded optimization run (CLI ``optimize`` subcommand)."""
    model = scenario.load_model()
    scene = scenario.load_scene()
    params = scenario_cost_params(scenario, closure_enabled=closure)
    extra = {} if budget_s is None else {"budget_s": budget_s}
    config = scenario_optimizer_config(scenario, seed, **extra)
    result = optimize(model, scene, scenario.start_config, scenario.goal_config,
                      params, config)
    record = _optimization_trial_record(0, seed, result)
    ref = ClosureReference.capture(model, scenario.start_config)
    report = is_valid(result.trajectory, model, scene,
                      params.with_closure(True) if closure else params,
                      config.validation_samples)
    if report.translation_deviation_trace is not None:
        record["deviation_trace"] = {
            "translation_m": [float(v) for v in report.translation_deviation_trace],
            "orientation_rad": [float(v) for v in report.orientation_deviation_trace],
        }
    record["closure_reference"] = {
        "t_desired_m": ref.t_desired.tolist(),
        "o_desired_rad": ref.o_desired.tolist(),
    }
    return {
        "schema": REPORT_SCHEMA,
        "mode": "optimize",
        "closure": closure,
        "trial": record,
    }


# ---------------------------------------------------------------------------
# Pick pipeline
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CategoryData:
    space: "object"  # ShapeSpace
    instance_grasps: dict[str, GraspSet]


def load_category(scenario: Scenario):
    """Shape space (built from the category's training clouds unless a
    prebuilt bundle is given) plus ground-truth grasps per instance."""
    category = scenario.category_dir
    grasps = load_grasps(category / "grasps.yaml")
    if scenario.shape_space_path is not None:
        space = load_space(scenario.shape_space_path)
    else:
        canonical = load_cloud(category / "canonical.xyz")
        training = [
            load_cloud(p) for p in sorted(category.glob("train_*.xyz"))
        ]
        space, _ = build_shape_space(canonical, training, scenario.n_components,
                                     CPDParams(), grasps)
    instances = {}
    meta_path = category / "instances.yaml"
    if meta_path.exists():
        with open(meta_path) as fh:
            meta = yaml.safe_load(fh)
        for name, entry in meta.get("instances", {}).items():
            if "grasps" in entry:
                instances[name] = grasps_from_dict(entry["grasps"])
    return CategoryData(space=space, instance_grasps=instances)


def _pose_angle_error(a: RigidTransform, b: RigidTransform) -> float:
    from .transforms import rotation_log

    return float(np.linalg.norm(rotation_log(a.rotation.T @ b.rotation)))


def run_pick(scenario: Scenario) -> dict:
    """Full pipeline per trial: pose estimation on the observed cloud,
    latent shape inference, grasp warping, goal resolution and reaching
    trajectory optimization (closure disabled: the hands are still empty)."""
    model = scenario.load_model()
    scene = scenario.load_scene()
    params = scenario_cost_params(scenario, closure_enabled=False)
    setup_t0 = time.perf_counter()
    category = load_category(scenario)
    space = category.space
    setup_s = time.perf_counter() - setup_t0

    trials = []
    for i in range(scenario.trials):
        seed = scenario.base_seed + i
        rng = np.random.default_rng(seed)
        obs_name = scenario.observations[i % len(scenario.observations)]
        rotation = scenario.object_rotations[i % len(scenario.object_rotations)]
        trial = _run_pick_trial(scenario, model, scene, params, space,
                                category.instance_grasps.get(obs_name),
                                obs_name, rotation, i, seed, rng)
        trials.append(trial)

    stage_names = ("pose_estimation", "grasp_generation", "goal_resolution",
                   "trajectory_optimization")
    aggregates = {
        "trials": len(trials),
        "successes": sum(t["success"] for t in trials),
        "success_rate": sum(t["success"] for t in trials) / len(trials),
        "stage_success_rates": {
            name: (
                sum(t["stages"][name]["success"] for t in trials if name in t["stages"])
                / max(sum(1 for t in trials if name in t["stages"]), 1)
            )
            for name in stage_names
        },
        "timing": {
            "setup_s": setup_s,
            **{
                f"{name}": _mean_std(
                    t["timing"][f"{name}_s"] for t in trials if f"{name}_s" in t["timing"]
                )
                for name in stage_names
            },
            "total": _mean_std(t["timing"]["total_s"] for t in trials),
        },
    }
    return {
        "schema": REPORT_SCHEMA,
        "mode": "pick",
        "trials": trials,
        "aggregates": aggregates,
    }


def _run_pick_trial(scenario, model, scene, params, space, truth_grasps,
                    obs_name, rotation, index, seed, rng) -> dict:
    trial = {
        "index": index,
        "seed": seed,
        "observation": obs_name,
        "object_rotation_rad": float(rotation),
        "stages": {},
        "success": False,
        "timing": {},
    }
    t_total = time.perf_counter()

    # observed cloud in the world frame
    instance = load_cloud(scenario.category_dir / obs_name)
    object_pose = RigidTransform(
        rotation_about_axis(np.array([0.0, 0.0, 1.0]), rotation),
        scenario.object_position,
    )
    pts = object_pose.apply(instance.points)
    if scenario.observation_noise > 0.0:
        pts = pts + rng.normal(0.0, scenario.observation_noise, size=pts.shape)
    observed = PointCloud(pts)

    # stage 1: initial pose estimate, with yaw noise injected to probe the
    # registration's robustness against misalignment
    t0 = time.perf_counter()
    try:
        init_pose = estimate_initial_pose(observed, space)
        yaw_err = float(rng.uniform(-scenario.yaw_noise, scenario.yaw_noise))
        centroid = RigidTransform(np.eye(3), space.canonical.mean(axis=0))
        spin = RigidTransform(rotation_about_axis(np.array([0.0, 0.0, 1.0]), yaw_err))
        init_pose = init_pose @ centroid @ spin @ centroid.inverse()
        yaw_estimate_err = wrap_angle(init_pose.rpy()[2] - rotation - yaw_err)
        trial["stages"]["pose_estimation"] = {
            "success": True,
            "injected_yaw_noise_rad": yaw_err,
            "yaw_error_rad": float(yaw_estimate_err),
        }
    except Exception as exc:  # recorded, trial continues to the next one
        trial["stages"]["pose_estimation"] = {"success": False, "error": str(exc)}
        trial["timing"]["pose_estimation_s"] = time.perf_counter() - t0
        trial["timing"]["total_s"] = time.perf_counter() - t_total
        return trial
    trial["timing"]["pose_estimation_s"] = time.perf_counter() - t0

    # stage 2: latent inference and grasp warping
    t0 = time.perf_counter()
    descriptor = infer_latent(space, observed, init_pose)
    _, fld = reconstruct(space, descriptor.coordinates)
    warped = warp_grasp_set(fld, space.grasps)
    world_grasps = GraspSet(
        left=tuple(
            type(p)(p.label, descriptor.alignment @ p.pose) for p in warped.left
        ),
        right=tuple(
            type(p)(p.label, descriptor.alignment @ p.pose) for p in warped.right
        ),
    )
    registration_ok = descriptor.residual < 0.02  # sane mean point distance
    grasp_stage = {
        "success": bool(registration_ok),
        "converged": bool(descriptor.converged),
        "residual_m": float(descriptor.residual),
        "latent_norm": float(np.linalg.norm(descriptor.coordinates)),
    }
    if truth_grasps is not None:
        pos_errs, ang_errs = [], []
        for side in ("left", "right"):
            truth_world = object_pose @ truth_grasps.arm(side)[-1].pose
            got = world_grasps.arm(side)[-1].pose
            pos_errs.append(float(np.linalg.norm(
                truth_world.translation - got.translation)))
            ang_errs.append(_pose_angle_error(truth_world, got))
        grasp_stage["grasp_position_error_m"] = max(pos_errs)
        grasp_stage["grasp_orientation_error_rad"] = max(ang_errs)
        grasp_stage["accurate"] = bool(
            max(pos_errs) < scenario.grasp_position_tolerance
            and max(ang_errs) < scenario.grasp_orientation_tolerance
        )
        grasp_stage["success"] = grasp_stage["success"] and grasp_stage["accurate"]
    trial["stages"]["grasp_generation"] = grasp_stage
    trial["timing"]["grasp_generation_s"] = time.perf_counter() - t0

    # stage 3: pre-grasp poses to a joint-space goal
    t0 = time.perf_counter()
    try:
        goal = resolve_goal_configuration(
            model, scene,
            world_grasps.left[0].pose, world_grasps.right[0].pose,
            scenario.start_config, IKParams(), rng_seed=seed,
        )
        trial["stages"]["goal_resolution"] = {"success": True}
    except GoalResolutionError as exc:
        trial["stages"]["goal_resolution"] = {"success": False, "error": str(exc)}
        trial["timing"]["goal_resolution_s"] = time.perf_counter() - t0
        trial["timing"]["total_s"] = time.perf_counter() - t_total
        return trial
    trial["timing"]["goal_resolution_s"] = time.perf_counter() - t0

    # stage 4: reaching trajectory (hands empty: closure disabled)
    t0 = time.perf_counter()
    config = scenario_optimizer_config(scenario, seed)
    result = optimize(model, scene, scenario.start_config, goal, params, config)
    trial["stages"]["trajectory_optimization"] = {
        "success": bool(result.success),
        "iterations": int(result.iterations),
    }
    trial["keyframes"] = result.trajectory.keyframes.tolist()
    trial["timing"]["trajectory_optimization_s"] = time.perf_counter() - t0

    trial["success"] = all(s["success"] for s in trial["stages"].values())
    trial["timing"]["total_s"] = time.perf_counter() - t_total
    return trial


# ---------------------------------------------------------------------------
# Table rendering
# ---------------------------------------------------------------------------


def format_table(report: dict) -> str:
    """Human-readable runtime/success tables."""
    lines = []
    if report["mode"] == "lift-comparison":
        off = report["modes"]["closure_disabled"]["aggregates"]
        on = report["modes"]["closure_enabled"]["aggregates"]
        growth = report.get("timing", {}).get("runtime_growth_pct")
        lines.append(f"{'':24s}{'Without closure':>18s}{'With closure':>16s}")
        lines.append(
            f"{'Runtime [s]':24s}"
            f"{off['timing']['mean_s']:>11.2f}±{off['timing']['std_s']:.2f}"
            f"{on['timing']['mean_s']:>11.2f}±{on['timing']['std_s']:.2f}"
        )
        lines.append(
            f"{'Success rate':24s}{off['success_rate']:>17.0%}{on['success_rate']:>15.0%}"
        )
        if growth is not None:
            lines.append(f"{'Runtime growth':24s}{'-':>18s}{growth:>14.0f}%")
    elif report["mode"] == "pick":
        agg = report["aggregates"]
        lines.append(f"{'Component':28s}{'Runtime [s]':>16s}{'Success rate':>14s}")
        for name in ("pose_estimation", "grasp_generation", "goal_resolution",
                     "trajectory_optimization"):
            t = agg["timing"].get(name, {})
            rate = agg["stage_success_rates"].get(name)
            mean = t.get("mean_s")
            std = t.get("std_s")
            runtime = "-" if mean is None else f"{mean:.2f}±{std:.2f}"
            lines.append(
                f"{name.replace('_', ' ').capitalize():28s}{runtime:>16s}"
                f"{rate:>13.0%}"
            )
        total = agg["timing"]["total"]
        lines.append(
            f"{'Complete pipeline':28s}"
            f"{total['mean_s']:.2f}±{total['std_s']:.2f}".ljust(44)
            + f"{agg['success_rate']:>13.0%}"
        )
    else:
        for label, block in report.get("modes", {}).items():
            agg = block["aggregates"]
            lines.append(
                f"{label:24s} success {agg['success_rate']:.0%} "
                f"runtime {agg['timing']['mean_s']:.2f}±{agg['timing']['std_s']:.2f} s"
            )
    return "\n".join(lines)


def build_space_bundle(category_dir, out_path, n_components: int = 8):
    """Register the category and store the shape space as an npz bundle."""
    category_dir = Path(category_dir)
    grasps = load_grasps(category_dir / "grasps.yaml")
    canonical = load_cloud(category_dir / "canonical.xyz")
    training = [load_cloud(p) for p in sorted(category_dir.glob("train_*.xyz"))]
    space, _ = build_shape_space(canonical, training, n_components, CPDParams(), grasps)
    save_space(out_path, space)
    return space
