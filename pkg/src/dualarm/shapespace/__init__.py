"""Category-level shape spaces and grasp transfer."""

from .cloud import PointCloud, density_weights, load_cloud, load_xyz, save_f32, save_xyz
from .cpd import CPDParams, DeformationField, RegistrationError, cpd_register
from .grasps import (
    ControlPose,
    GraspSet,
    grasps_from_dict,
    load_grasps,
    save_grasps,
    warp_grasp_poses,
    warp_grasp_set,
)
from .inference import (
    InferenceParams,
    LatentDescriptor,
    PoseEstimationError,
    estimate_initial_pose,
    infer_latent,
)
from .space import (
    ShapeSpace,
    ShapeSpaceError,
    build_shape_space,
    load_space,
    pca_em,
    reconstruct,
    save_space,
)

__all__ = [
    "CPDParams",
    "ControlPose",
    "DeformationField",
    "GraspSet",
    "InferenceParams",
    "LatentDescriptor",
    "PointCloud",
    "PoseEstimationError",
    "RegistrationError",
    "ShapeSpace",
    "ShapeSpaceError",
    "build_shape_space",
    "cpd_register",
    "density_weights",
    "estimate_initial_pose",
    "grasps_from_dict",
    "infer_latent",
    "load_cloud",
    "load_grasps",
    "load_space",
    "load_xyz",
    "pca_em",
    "reconstruct",
    "save_f32",
    "save_grasps",
    "save_space",
    "save_xyz",
    "warp_grasp_poses",
    "warp_grasp_set",
]
