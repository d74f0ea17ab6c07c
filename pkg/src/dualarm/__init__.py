"""Dual-arm manipulation planning: stochastic trajectory optimization with
kinematic-chain closure constraints plus category-level grasp transfer
through a latent shape space."""

from ._kernels import BACKEND_NAME as KERNEL_BACKEND

__version__ = "0.1.0"
__all__ = ["KERNEL_BACKEND", "__version__"]
