"""Point cloud container, file IO and observation weights.

Supported formats: ASCII ``.xyz`` (one ``x y z`` line per point) and raw
little-endian float32 triplets (``.f32`` / ``.bin``).
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.spatial import cKDTree


@dataclass(frozen=True)
class PointCloud:
    """M x 3 points in meters with optional per-point weights."""

    points: np.ndarray
    weights: np.ndarray | None = None

    def __post_init__(self):
        pts = np.ascontiguousarray(self.points, dtype=float)
        if pts.ndim != 2 or pts.shape[1] != 3 or pts.shape[0] < 4:
            raise ValueError("point cloud needs at least 4 points of dimension 3")
        if not np.all(np.isfinite(pts)):
            raise ValueError("point cloud contains non-finite coordinates")
        pts.flags.writeable = False
        object.__setattr__(self, "points", pts)
        if self.weights is not None:
            w = np.ascontiguousarray(self.weights, dtype=float)
            if w.shape != (pts.shape[0],):
                raise ValueError("weights must match the number of points")
            w.flags.writeable = False
            object.__setattr__(self, "weights", w)

    def __len__(self) -> int:
        return self.points.shape[0]

    @property
    def centroid(self) -> np.ndarray:
        return self.points.mean(axis=0)

    def transformed(self, transform) -> "PointCloud":
        return PointCloud(transform.apply(self.points), self.weights)


def save_xyz(path, points: np.ndarray):
    np.savetxt(path, np.asarray(points, dtype=float), fmt="%.9f")


def load_xyz(path) -> PointCloud:
    return PointCloud(np.loadtxt(path, dtype=float).reshape(-1, 3))


def save_f32(path, points: np.ndarray):
    np.asarray(points, dtype="<f4").tofile(path)


def load_f32(path) -> PointCloud:
    data = np.fromfile(path, dtype="<f4")
    return PointCloud(data.reshape(-1, 3).astype(float))


def load_cloud(path) -> PointCloud:
    path = Path(path)
    if path.suffix == ".xyz":
        return load_xyz(path)
    if path.suffix in (".f32", ".bin"):
        return load_f32(path)
    raise ValueError(f"unsupported point cloud format {path.suffix!r}")


def density_weights(points: np.ndarray, k: int = 8) -> np.ndarray:
    """Inverse-density observation weights: proportional to the mean
    distance to the k nearest neighbors, capped at three times the median
    and normalized to unit mean. Falls back to uniform weights for tiny
    clouds."""
    pts = np.asarray(points, dtype=float)
    m = pts.shape[0]
    if m <= k + 1:
        return np.ones(m)
    dists, _ = cKDTree(pts).query(pts, k=k + 1)
    radii = dists[:, 1:].mean(axis=1)
    med = np.median(radii)
    if med <= 0.0:
        return np.ones(m)
    w = np.minimum(radii, 3.0 * med)
    return w / w.mean()
