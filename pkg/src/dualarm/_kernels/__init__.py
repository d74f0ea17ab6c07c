"""Batch kernel backend selection.

The compiled extension is preferred when available; the vectorized numpy
fallback is used otherwise. Set ``DUALARM_KERNELS=numpy`` or
``DUALARM_KERNELS=native`` to force a backend (forcing ``native`` raises if
the extension was not built).
"""

from __future__ import annotations

import os

from . import numpy_backend
from .common import (
    gravity_torques_batch,
    relative_pose_batch,
    rodrigues_batch,
    rpy_batch,
)

try:
    from . import _native
except ImportError:
    _native = None


def get_backend(name: str):
    if name == "numpy":
        return numpy_backend
    if name == "native":
        if _native is None:
            raise ImportError("compiled kernel extension is not available")
        return _native
    raise ValueError(f"unknown kernel backend {name!r}")


def available_backends() -> list[str]:
    return ["numpy"] + (["native"] if _native is not None else [])


_forced = os.environ.get("DUALARM_KERNELS", "").strip().lower()
if _forced:
    _backend = get_backend(_forced)
else:
    _backend = _native if _native is not None else numpy_backend

BACKEND_NAME = _backend.BACKEND_NAME
fk_frames = _backend.fk_frames
pair_distances = _backend.pair_distances

if _backend is not numpy_backend:

    def gravity_torques_batch(pack, link_rot, link_t):  # noqa: F811
        return _backend.gravity_torques(
            pack.axes, pack.com, pack.mass, pack.n_left, pack.gravity,
            link_rot, link_t,
        )

    gravity_torques_batch.__doc__ = (
        "Signed gravity torques (B, J); native-kernel dispatch of "
        "common.gravity_torques_batch."
    )

__all__ = [
    "BACKEND_NAME",
    "available_backends",
    "fk_frames",
    "get_backend",
    "gravity_torques_batch",
    "pair_distances",
    "relative_pose_batch",
    "rodrigues_batch",
    "rpy_batch",
]
