"""Low-dimensional latent space over deformation fields.

Deformation fields from the canonical model to every training instance are
flattened and decomposed with an EM-style iterative PCA; the resulting
orthonormal basis spans the category's shape variation. Latent coordinates
are dimensionless (scaled by per-component standard deviations). Kernel
coefficients are carried alongside the displacement basis so any point of
the latent space yields a field that can warp arbitrary query points.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..transforms import RigidTransform
from .cloud import PointCloud
from .cpd import CPDParams, DeformationField, cpd_register, field_from_displacements
from .grasps import GraspSet

_VAR_FLOOR = 1e-12  # m^2, keeps zero-variance components inert but finite


class ShapeSpaceError(ValueError):
    pass


def pca_em(data: np.ndarray, n_components: int, max_iterations: int = 200,
           tolerance: float = 1e-12) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """EM iterations for PCA (Roweis): alternate latent estimation and
    basis regression, then orthonormalize and rotate to the principal
    directions of the projected data.

    Returns (mean (S,), basis (S, d) with orthonormal columns ordered by
    nonincreasing variance, variances (d,)).
    """
    data = np.asarray(data, dtype=float)
    n, s = data.shape
    if not 1 <= n_components <= n:
        raise ShapeSpaceError("component count must be in [1, n_samples]")
    mean = data.mean(axis=0)
    centered = data - mean

    # deterministic in-span init keeps iterates inside the data span
    c = centered[:n_components].T.copy()  # (S, d)
    for j in range(n_components):
        norm = np.linalg.norm(c[:, j])
        if norm < 1e-12:
            c[:, j] = 0.0
            c[min(j, s - 1), j] = 1.0
        else:
            c[:, j] /= norm
    prev = None
    for _ in range(max_iterations):
        latent = np.linalg.lstsq(c, centered.T, rcond=None)[0]  # (d, n)
        c = np.linalg.lstsq(latent.T, centered, rcond=None)[0].T  # (S, d)
        q, _ = np.linalg.qr(c)
        c = q
        scores = centered @ c
        obj = float((scores * scores).sum())
        if prev is not None and abs(obj - prev) <= tolerance * max(abs(obj), 1.0):
            break
        prev = obj

    q, _ = np.linalg.qr(c)
    scores = centered @ q  # (n, d)
    cov = scores.T @ scores / max(n - 1, 1)
    eigvals, eigvecs = np.linalg.eigh(cov)
    order = np.argsort(eigvals)[::-1]
    basis = q @ eigvecs[:, order]
    variances = np.maximum(eigvals[order], 0.0)
    return mean, basis, variances


@dataclass(frozen=True)
class ShapeSpace:
    """Canonical cloud, field statistics and canonical grasp control poses."""

    canonical: np.ndarray  # (M, 3)
    mean_field: np.ndarray  # (3M,)
    basis: np.ndarray  # (3M, d) orthonormal columns
    variances: np.ndarray  # (d,) nonincreasing
    mean_coeff: np.ndarray  # (M, 3) kernel coefficients of the mean field
    coeff_basis: np.ndarray  # (d, M, 3) kernel coefficients of basis columns
    center: np.ndarray  # canonical normalization offset
    scale: float
    kernel_width: float  # beta, normalized units
    grasps: GraspSet | None = None

    def __post_init__(self):
        for name in ("canonical", "mean_field", "basis", "variances",
                     "mean_coeff", "coeff_basis", "center"):
            v = np.ascontiguousarray(getattr(self, name), dtype=float)
            v.flags.writeable = False
            object.__setattr__(self, name, v)

    @property
    def n_points(self) -> int:
        return self.canonical.shape[0]

    @property
    def n_components(self) -> int:
        return self.basis.shape[1]

    @property
    def component_scales(self) -> np.ndarray:
        """Meters per unit of each dimensionless latent coordinate."""
        return np.sqrt(np.maximum(self.variances, _VAR_FLOOR))

    def field_vector(self, coordinates: np.ndarray) -> np.ndarray:
        coords = np.asarray(coordinates, dtype=float)
        if coords.shape != (self.n_components,):
            raise ShapeSpaceError(
                f"expected {self.n_components} latent coordinates, got {coords.shape}"
            )
        return self.mean_field + self.basis @ (coords * self.component_scales)

    def field_coefficients(self, coordinates: np.ndarray) -> np.ndarray:
        coords = np.asarray(coordinates, dtype=float) * self.component_scales
        return self.mean_coeff + np.einsum("d,dmk->mk", coords, self.coeff_basis)

    def project(self, field_vector: np.ndarray) -> np.ndarray:
        """Dimensionless latent coordinates of a flattened field."""
        field_vector = np.asarray(field_vector, dtype=float).reshape(-1)
        return (self.basis.T @ (field_vector - self.mean_field)) / self.component_scales

    def deformation_field(self, coordinates: np.ndarray) -> DeformationField:
        disp = self.field_vector(coordinates).reshape(-1, 3)
        return DeformationField(
            canonical=self.canonical,
            displacements=disp,
            coefficients=self.field_coefficients(coordinates),
            center=self.center,
            scale=self.scale,
            kernel_width=self.kernel_width,
        )


def build_shape_space(canonical: PointCloud, training_clouds: list[PointCloud],
                      n_components: int = 8,
                      cpd_params: CPDParams = CPDParams(),
                      grasps: GraspSet | None = None,
                      ) -> tuple[ShapeSpace, list[DeformationField]]:
    """Register the canonical model to every training cloud and decompose
    the resulting deformation fields."""
    if len(training_clouds) < 2:
        raise ShapeSpaceError("need at least 2 training clouds")
    if n_components > len(training_clouds):
        raise ShapeSpaceError("component count exceeds the training set size")

    fields = [cpd_register(canonical, target, cpd_params) for target in training_clouds]
    data = np.stack([f.flattened for f in fields])  # (n, 3M)
    mean, basis, variances = pca_em(data, n_components)

    coeffs = np.stack([f.coefficients for f in fields])  # (n, M, 3)
    mean_coeff = coeffs.mean(axis=0)
    centered = data - mean
    centered_coeffs = coeffs - mean_coeff
    # expansion of each basis column in terms of the centered training
    # fields; exact because the EM iterates stay inside the data span
    gram = centered @ centered.T
    alpha = np.linalg.lstsq(gram, centered @ basis, rcond=None)[0]  # (n, d)
    coeff_basis = np.einsum("nd,nmk->dmk", alpha, centered_coeffs)

    template = fields[0]
    space = ShapeSpace(
        canonical=canonical.points,
        mean_field=mean,
        basis=basis,
        variances=variances,
        mean_coeff=mean_coeff,
        coeff_basis=coeff_basis,
        center=template.center,
        scale=template.scale,
        kernel_width=template.kernel_width,
        grasps=grasps,
    )
    return space, fields


def reconstruct(space: ShapeSpace, coordinates,
                alignment: RigidTransform | None = None,
                ) -> tuple[PointCloud, DeformationField]:
    """Warped canonical cloud and deformation field at a latent point; the
    cloud is rigidly aligned when a transform is given."""
    field = space.deformation_field(np.asarray(coordinates, dtype=float))
    pts = space.canonical + field.displacements
    if alignment is not None:
        pts = alignment.apply(pts)
    return PointCloud(pts), field


def save_space(path, space: ShapeSpace):
    from .grasps import grasps_to_arrays

    arrays = {
        "canonical": space.canonical,
        "mean_field": space.mean_field,
        "basis": space.basis,
        "variances": space.variances,
        "mean_coeff": space.mean_coeff,
        "coeff_basis": space.coeff_basis,
        "center": space.center,
        "scale": np.array(space.scale),
        "kernel_width": np.array(space.kernel_width),
    }
    if space.grasps is not None:
        arrays.update(grasps_to_arrays(space.grasps))
    np.savez(path, **arrays)


def load_space(path) -> ShapeSpace:
    from .grasps import grasps_from_arrays

    with np.load(path, allow_pickle=False) as data:
        grasps = grasps_from_arrays(data)
        return ShapeSpace(
            canonical=data["canonical"],
            mean_field=data["mean_field"],
            basis=data["basis"],
            variances=data["variances"],
            mean_coeff=data["mean_coeff"],
            coeff_basis=data["coeff_basis"],
            center=data["center"],
            scale=float(data["scale"]),
            kernel_width=float(data["kernel_width"]),
            grasps=grasps,
        )
