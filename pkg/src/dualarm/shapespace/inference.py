"""Latent-shape inference against partial observations.

The initial 6D pose comes from the observation's centroid and principal
axes (signs disambiguated with the canonical model's axis conventions).
Inference then alternates nearest-neighbor correspondences, a weighted
rigid alignment step and regularized gradient descent on the latent
coordinates; every accepted step lowers the objective. Several perturbed
yaw initializations are tried and the best residual is kept.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from ..transforms import RigidTransform, rotation_about_axis
from .cloud import PointCloud, density_weights
from .space import ShapeSpace


class PoseEstimationError(ValueError):
    pass


@dataclass(frozen=True)
class InferenceParams:
    max_outer_iterations: int = 40
    descent_steps: int = 4  # latent gradient-descent steps per outer loop
    initial_step: float = 1.0
    max_step_halvings: int = 25
    regularization: float = 0.005  # relative to the data-term curvature
    tolerance: float = 1e-6  # relative objective decrease to stop
    yaw_restarts: tuple[float, ...] = (0.0, 0.2, -0.2)


@dataclass
class LatentDescriptor:
    """Latent coordinates plus the rigid alignment of the canonical model
    onto the observation."""

    coordinates: np.ndarray
    alignment: RigidTransform
    residual: float  # mean weighted point distance, meters
    converged: bool
    objective_trace: list[float] = field(default_factory=list)


def _principal_axes(points: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    centered = points - points.mean(axis=0)
    cov = centered.T @ centered / points.shape[0]
    eigvals, eigvecs = np.linalg.eigh(cov)
    order = np.argsort(eigvals)[::-1]
    return eigvals[order], eigvecs[:, order], centered


def _axis_skewness(centered: np.ndarray, axes: np.ndarray) -> np.ndarray:
    proj = centered @ axes
    return (proj**3).sum(axis=0)


def estimate_initial_pose(observed: PointCloud, space: ShapeSpace) -> RigidTransform:
    """Centroid plus principal-axes rotation.

    The eigenvector sign ambiguity leaves four right-handed axis choices;
    each candidate alignment is scored by the nearest-neighbor distance of
    the transformed canonical model to the observation and the best one is
    kept (the canonical prior resolves the ambiguity). Raises on
    (near-)isotropic clouds whose axes are ambiguous.
    """
    obs_vals, obs_axes, _ = _principal_axes(observed.points)
    can_vals, can_axes, _ = _principal_axes(space.canonical)

    rel_gap = np.diff(obs_vals[::-1])[::-1] / max(obs_vals[0], 1e-18)
    if obs_vals[0] <= 0.0 or np.any(rel_gap < 0.02):
        raise PoseEstimationError(
            "observation has ambiguous principal axes; cannot orient it"
        )

    can_axes = can_axes.copy()
    can_axes[:, 2] = np.cross(can_axes[:, 0], can_axes[:, 1])
    can_centroid = space.canonical.mean(axis=0)
    # subsample the canonical model for hypothesis scoring
    probe = space.canonical[:: max(1, space.canonical.shape[0] // 200)]
    tree = cKDTree(observed.points)

    best: RigidTransform | None = None
    best_score = np.inf
    for s0, s1 in ((1, 1), (1, -1), (-1, 1), (-1, -1)):
        axes = obs_axes.copy()
        axes[:, 0] *= s0
        axes[:, 1] *= s1
        axes[:, 2] = np.cross(axes[:, 0], axes[:, 1])
        rotation = axes @ can_axes.T
        translation = observed.centroid - rotation @ can_centroid
        candidate = RigidTransform(rotation, translation)
        score = float(tree.query(candidate.apply(probe))[0].mean())
        if score < best_score:
            best_score = score
            best = candidate
    return best


def _weighted_kabsch(source: np.ndarray, target: np.ndarray,
                     weights: np.ndarray) -> RigidTransform:
    wsum = weights.sum()
    sc = (weights[:, None] * source).sum(axis=0) / wsum
    tc = (weights[:, None] * target).sum(axis=0) / wsum
    h = (weights[:, None] * (source - sc)).T @ (target - tc)
    u, _, vt = np.linalg.svd(h)
    d = np.sign(np.linalg.det(vt.T @ u.T))
    rot = vt.T @ np.diag([1.0, 1.0, d]) @ u.T
    return RigidTransform(rot, tc - rot @ sc)


def infer_latent(space: ShapeSpace, observed: PointCloud,
                 init_pose: RigidTransform | None = None,
                 params: InferenceParams = InferenceParams()) -> LatentDescriptor:
    """Jointly fit latent coordinates and a rigid alignment to an observed
    cloud by minimizing a regularized weighted point distance."""
    if init_pose is None:
        init_pose = estimate_initial_pose(observed, space)

    obs = observed.points
    weights = observed.weights if observed.weights is not None else density_weights(obs)
    wsum = float(weights.sum())
    scale2 = space.scale * space.scale
    comp_scales = space.component_scales
    base_pts = space.canonical + space.mean_field.reshape(-1, 3)
    basis_pts = space.basis.reshape(space.n_points, 3, space.n_components)
    centroid = space.canonical.mean(axis=0)

    best: LatentDescriptor | None = None
    for yaw in params.yaw_restarts:
        spin = RigidTransform(rotation_about_axis(np.array([0.0, 0.0, 1.0]), yaw))
        pivot = RigidTransform(np.eye(3), centroid)
        start_pose = init_pose @ pivot @ spin @ pivot.inverse()
        descriptor = _fit_single(
            space, obs, weights, wsum, scale2, comp_scales, base_pts, basis_pts,
            start_pose, params,
        )
        if best is None or descriptor.residual < best.residual:
            best = descriptor
    return best


def _fit_single(space, obs, weights, wsum, scale2, comp_scales, base_pts,
                basis_pts, start_pose, params) -> LatentDescriptor:
    z = np.zeros(space.n_components)
    rot = start_pose.rotation.copy()
    t = start_pose.translation.copy()
    trace: list[float] = []
    converged = False
    gamma = None
    precond = None

    def model_points(zc):
        disp = np.einsum("mkd,d->mk", basis_pts, zc * comp_scales)
        return base_pts + disp

    def objective(zc, rotc, tc, corr, local=None):
        local = model_points(zc) if local is None else local
        diff = local[corr] @ rotc.T + tc - obs
        data = float((weights * (diff * diff).sum(axis=1)).sum() / (wsum * scale2))
        return data + float(gamma * (zc @ zc)), diff

    prev_outer = np.inf
    for _ in range(params.max_outer_iterations):
        local = model_points(z)
        world = local @ rot.T + t
        corr = cKDTree(world).query(obs)[1]

        if gamma is None:
            rows = basis_pts[corr] * comp_scales[None, None, :]
            curv = 2.0 * np.einsum("n,nkd->d", weights, rows * rows) / (wsum * scale2)
            gamma = params.regularization * float(curv.mean()) / 2.0
            precond = curv + 2.0 * gamma
        obj, _ = objective(z, rot, t, corr, local)
        trace.append(obj)

        # rigid step: exact minimizer of the same weighted criterion
        align = _weighted_kabsch(local[corr], obs, weights)
        rot, t = align.rotation.copy(), align.translation.copy()
        obj, diff = objective(z, rot, t, corr, local)
        trace.append(obj)

        # diagonally preconditioned gradient descent with step halving
        for _ in range(params.descent_steps):
            grad_pts = (weights[:, None] * diff) @ rot  # back in the model frame
            grad = (
                2.0 * np.einsum("nk,nkd->d", grad_pts, basis_pts[corr]) * comp_scales
                / (wsum * scale2)
                + 2.0 * gamma * z
            )
            if float(grad @ grad) <= 0.0:
                break
            direction = grad / precond
            step = params.initial_step
            accepted = False
            for _ in range(params.max_step_halvings):
                z_try = z - step * direction
                obj_try, diff_try = objective(z_try, rot, t, corr)
                if obj_try < obj:
                    z, obj, diff = z_try, obj_try, diff_try
                    trace.append(obj)
                    accepted = True
                    break
                step *= 0.5
            if not accepted:
                break

        if prev_outer - obj <= params.tolerance * max(abs(obj), 1e-18):
            converged = True
            break
        prev_outer = obj

    local = model_points(z)
    diff = local[cKDTree(local @ rot.T + t).query(obs)[1]] @ rot.T + t - obs
    residual = float((weights * np.linalg.norm(diff, axis=1)).sum() / wsum)
    return LatentDescriptor(
        coordinates=z,
        alignment=RigidTransform(rot, t),
        residual=residual,
        converged=converged,
        objective_trace=trace,
    )
