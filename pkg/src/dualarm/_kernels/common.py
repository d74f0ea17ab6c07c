"""Backend-independent batched helpers built on numpy.

These consume the outputs of the backend kernels (``fk_frames`` and
``pair_distances``) and are cheap enough to stay vectorized numpy in both
backends.
"""

from __future__ import annotations

import numpy as np


def rodrigues_batch(axis: np.ndarray, angles: np.ndarray) -> np.ndarray:
    """Rotation matrices (B, 3, 3) about one fixed unit axis."""
    x, y, z = axis
    c = np.cos(angles)
    s = np.sin(angles)
    v = 1.0 - c
    rot = np.empty((angles.shape[0], 3, 3))
    rot[:, 0, 0] = x * x * v + c
    rot[:, 0, 1] = x * y * v - z * s
    rot[:, 0, 2] = x * z * v + y * s
    rot[:, 1, 0] = x * y * v + z * s
    rot[:, 1, 1] = y * y * v + c
    rot[:, 1, 2] = y * z * v - x * s
    rot[:, 2, 0] = x * z * v - y * s
    rot[:, 2, 1] = y * z * v + x * s
    rot[:, 2, 2] = z * z * v + c
    return rot


def rpy_batch(rot: np.ndarray) -> np.ndarray:
    """Roll/pitch/yaw (B, 3) of rotation matrices (B, 3, 3), wrapped to
    (-pi, pi]; gimbal-degenerate rows fall back to roll = 0."""
    cp = np.hypot(rot[:, 0, 0], rot[:, 1, 0])
    pitch = np.arctan2(-rot[:, 2, 0], cp)
    degenerate = cp < 1e-8
    roll = np.where(degenerate, 0.0, np.arctan2(rot[:, 2, 1], rot[:, 2, 2]))
    yaw = np.where(
        degenerate,
        np.arctan2(-rot[:, 0, 1], rot[:, 1, 1]),
        np.arctan2(rot[:, 1, 0], rot[:, 0, 0]),
    )
    out = np.stack([roll, pitch, yaw], axis=1)
    out[out == -np.pi] = np.pi
    return out


def relative_pose_batch(eef_rot: np.ndarray, eef_t: np.ndarray):
    """Right-eef pose in the left-eef frame for a batch of FK results.

    Returns (rel_t (B, 3), rel_rpy (B, 3)).
    """
    r1t = eef_rot[:, 0].transpose(0, 2, 1)
    rel_rot = np.matmul(r1t, eef_rot[:, 1])
    rel_t = np.matmul(r1t, (eef_t[:, 1] - eef_t[:, 0])[:, :, None])[:, :, 0]
    return rel_t, rpy_batch(rel_rot)


def gravity_torques_batch(pack, link_rot: np.ndarray, link_t: np.ndarray) -> np.ndarray:
    """Signed gravity torques (B, J) from batched FK results; equals the
    gradient of gravitational potential energy w.r.t. joint angles."""
    b = link_rot.shape[0]
    j = pack.axes.shape[0]
    axes_w = np.matmul(link_rot, pack.axes[None, :, :, None])[..., 0]
    com_w = np.matmul(link_rot, pack.com[None, :, :, None])[..., 0] + link_t
    torques = np.empty((b, j))
    nl = pack.n_left
    for lo, hi in ((0, nl), (nl, j)):
        m = pack.mass[lo:hi]
        mc = com_w[:, lo:hi] * m[None, :, None]
        # reverse cumulative sums: masses and mass-weighted coms distal to k
        csum_mc = np.cumsum(mc[:, ::-1], axis=1)[:, ::-1]
        csum_m = np.cumsum(m[::-1])[::-1]
        moment = csum_mc - csum_m[None, :, None] * link_t[:, lo:hi]
        # tau_k = -a_k . (moment x g) with g = (0, 0, -gravity)
        ax = axes_w[:, lo:hi]
        torques[:, lo:hi] = pack.gravity * (
            ax[..., 0] * moment[..., 1] - ax[..., 1] * moment[..., 0]
        )
    return torques
