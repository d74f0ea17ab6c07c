"""Coherent point drift non-rigid registration.

Estimates a smooth displacement field from a canonical cloud onto a target
cloud via EM over a Gaussian mixture whose centroids are the warped
canonical points. Both clouds are normalized with the canonical cloud's
statistics so the recovered field is a pure Gaussian-kernel expansion: it
extends to arbitrary query points and stays closed under the linear
combinations taken by the shape space.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .cloud import PointCloud


class RegistrationError(RuntimeError):
    pass


@dataclass(frozen=True)
class CPDParams:
    kernel_width: float = 2.0  # beta, relative to the normalized cloud scale
    smoothness: float = 3.0  # lambda, regularization of the field
    outlier_weight: float = 0.1  # omega
    max_iterations: int = 80
    tolerance: float = 1e-6
    min_variance: float = 1e-10


def gaussian_kernel(a: np.ndarray, b: np.ndarray, width: float) -> np.ndarray:
    """K(i, j) = exp(-|a_i - b_j|^2 / (2 width^2))."""
    d2 = ((a[:, None, :] - b[None, :, :]) ** 2).sum(axis=2)
    return np.exp(-d2 / (2.0 * width * width))


@dataclass(frozen=True)
class DeformationField:
    """Dense displacement of the canonical points plus the Gaussian-kernel
    coefficients that extend the warp to arbitrary query points."""

    canonical: np.ndarray  # (M, 3) original metric coordinates
    displacements: np.ndarray  # (M, 3) meters
    coefficients: np.ndarray  # (M, 3) metric kernel coefficients
    center: np.ndarray  # canonical normalization offset
    scale: float  # canonical normalization scale
    kernel_width: float  # beta (normalized units)

    def __post_init__(self):
        for name in ("canonical", "displacements", "coefficients", "center"):
            v = np.ascontiguousarray(getattr(self, name), dtype=float)
            v.flags.writeable = False
            object.__setattr__(self, name, v)

    @property
    def flattened(self) -> np.ndarray:
        return self.displacements.reshape(-1)

    def warp(self, points: np.ndarray) -> np.ndarray:
        """Displace arbitrary points through the kernel extension."""
        pts = np.asarray(points, dtype=float).reshape(-1, 3)
        qn = (pts - self.center) / self.scale
        yn = (self.canonical - self.center) / self.scale
        k = gaussian_kernel(qn, yn, self.kernel_width)
        return pts + k @ self.coefficients


def _check_not_degenerate(points: np.ndarray, label: str):
    centered = points - points.mean(axis=0)
    s = np.linalg.svd(centered, compute_uv=False)
    if s[1] < 1e-9 * max(s[0], 1e-12):
        raise RegistrationError(f"{label} cloud is rank-deficient (collinear)")


def normalization(points: np.ndarray) -> tuple[np.ndarray, float]:
    """Zero-mean/unit-scale statistics of a cloud (rms radius scale)."""
    center = points.mean(axis=0)
    scale = float(np.sqrt(((points - center) ** 2).sum(axis=1).mean()))
    if scale <= 0.0:
        raise RegistrationError("cloud has zero spatial extent")
    return center, scale


def cpd_register(canonical: PointCloud, target: PointCloud,
                 params: CPDParams = CPDParams()) -> DeformationField:
    """Register the canonical cloud onto the target, returning the
    deformation field in metric coordinates."""
    y_raw = canonical.points
    x_raw = target.points
    _check_not_degenerate(y_raw, "canonical")
    _check_not_degenerate(x_raw, "target")

    center, scale = normalization(y_raw)
    y = (y_raw - center) / scale
    x = (x_raw - center) / scale
    m, n = y.shape[0], x.shape[0]

    g = gaussian_kernel(y, y, params.kernel_width)
    w = np.zeros((m, 3))
    warped = y.copy()
    sigma2 = ((x[None, :, :] - y[:, None, :]) ** 2).sum() / (3.0 * m * n)
    omega = params.outlier_weight

    for _ in range(params.max_iterations):
        d2 = ((x[None, :, :] - warped[:, None, :]) ** 2).sum(axis=2)
        p = np.exp(-d2 / (2.0 * sigma2))
        c = ((2.0 * np.pi * sigma2) ** 1.5) * (omega / (1.0 - omega)) * m / n
        denom = p.sum(axis=0) + c
        p /= denom[None, :]

        p1 = p.sum(axis=1)
        np_total = p1.sum()
        px = p @ x
        lhs = p1[:, None] * g + params.smoothness * sigma2 * np.eye(m)
        w = np.linalg.solve(lhs, px - p1[:, None] * y)
        warped = y + g @ w

        xpx = (p.sum(axis=0) * (x * x).sum(axis=1)).sum()
        trpxw = (px * warped).sum()
        twt = (p1 * (warped * warped).sum(axis=1)).sum()
        sigma2_new = (xpx - 2.0 * trpxw + twt) / (3.0 * np_total)
        sigma2_new = max(sigma2_new, params.min_variance)
        if abs(sigma2 - sigma2_new) < params.tolerance:
            sigma2 = sigma2_new
            break
        sigma2 = sigma2_new

    coefficients = scale * w
    displacements = g @ coefficients
    return DeformationField(
        canonical=y_raw,
        displacements=displacements,
        coefficients=coefficients,
        center=center,
        scale=scale,
        kernel_width=params.kernel_width,
    )


def field_from_displacements(template: DeformationField,
                             displacements: np.ndarray,
                             coefficients: np.ndarray) -> DeformationField:
    """Field with the same canonical support and kernel as ``template``."""
    return DeformationField(
        canonical=template.canonical,
        displacements=displacements,
        coefficients=coefficients,
        center=template.center,
        scale=template.scale,
        kernel_width=template.kernel_width,
    )
