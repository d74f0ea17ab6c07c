"""Pure-numpy fallback for the batch kernels.

Same call surface as the compiled extension; everything is vectorized over
the batch axis so the fallback stays usable for the full benchmark suite,
just slower.
"""

from __future__ import annotations

import numpy as np

from .common import rodrigues_batch

BACKEND_NAME = "numpy"

_GOLDEN = (np.sqrt(5.0) - 1.0) / 2.0
GOLDEN_ITERS = 48


def fk_frames(axes, org_rot, org_t, base_rot, base_t, tip_rot, tip_t, n_left, q):
    """Batched forward kinematics over both chains.

    Returns (link_rot (B,J,3,3), link_t (B,J,3), eef_rot (B,2,3,3),
    eef_t (B,2,3)).
    """
    q = np.ascontiguousarray(q, dtype=float)
    b, j = q.shape
    link_rot = np.empty((b, j, 3, 3))
    link_t = np.empty((b, j, 3))
    eef_rot = np.empty((b, 2, 3, 3))
    eef_t = np.empty((b, 2, 3))
    for cid, (lo, hi) in enumerate(((0, n_left), (n_left, j))):
        parent_rot = np.broadcast_to(base_rot, (b, 3, 3))
        parent_t = np.broadcast_to(base_t, (b, 3))
        for k in range(lo, hi):
            pivot_rot = parent_rot @ org_rot[k]
            pivot_t = parent_rot @ org_t[k] + parent_t
            link_rot[:, k] = pivot_rot @ rodrigues_batch(axes[k], q[:, k])
            link_t[:, k] = pivot_t
            parent_rot = link_rot[:, k]
            parent_t = pivot_t
        eef_rot[:, cid] = parent_rot @ tip_rot[cid]
        eef_t[:, cid] = parent_rot @ tip_t[cid] + parent_t
    return link_rot, link_t, eef_rot, eef_t


def _world_points(attach, local_pts, link_rot, link_t, base_rot, base_t):
    """World positions (B, nb, 3) of per-body local points."""
    b = link_rot.shape[0]
    j = link_rot.shape[1]
    out = np.empty((b, attach.shape[0], 3))
    for i, a in enumerate(attach):
        if a < 0:
            out[:, i] = local_pts[i]
        elif a == j:
            out[:, i] = base_rot @ local_pts[i] + base_t
        else:
            out[:, i] = np.einsum("bik,k->bi", link_rot[:, a], local_pts[i]) + link_t[:, a]
    return out


def _world_rots(attach, local_rot, link_rot, base_rot):
    b = link_rot.shape[0]
    j = link_rot.shape[1]
    out = np.empty((b, attach.shape[0], 3, 3))
    for i, a in enumerate(attach):
        if a < 0:
            out[:, i] = local_rot[i]
        elif a == j:
            out[:, i] = base_rot @ local_rot[i]
        else:
            out[:, i] = link_rot[:, a] @ local_rot[i]
    return out


def _seg_point_dist(p0, p1, pt):
    d = p1 - p0
    denom = np.einsum("bi,bi->b", d, d)
    t = np.einsum("bi,bi->b", pt - p0, d) / np.where(denom > 0.0, denom, 1.0)
    t = np.clip(t, 0.0, 1.0)
    closest = p0 + t[:, None] * d
    return np.linalg.norm(pt - closest, axis=1)


def _seg_seg_dist(p0, p1, q0, q1):
    d1 = p1 - p0
    d2 = q1 - q0
    r = p0 - q0
    a = np.einsum("bi,bi->b", d1, d1)
    e = np.einsum("bi,bi->b", d2, d2)
    f = np.einsum("bi,bi->b", d2, r)
    c = np.einsum("bi,bi->b", d1, r)
    bb = np.einsum("bi,bi->b", d1, d2)
    denom = a * e - bb * bb
    s = np.where(denom > 1e-18, np.clip((bb * f - c * e) / np.where(denom > 1e-18, denom, 1.0), 0.0, 1.0), 0.0)
    t = np.where(e > 1e-18, (bb * s + f) / np.where(e > 1e-18, e, 1.0), 0.0)
    s = np.where(t < 0.0, np.clip(-c / np.where(a > 1e-18, a, 1.0), 0.0, 1.0), s)
    s = np.where(t > 1.0, np.clip((bb - c) / np.where(a > 1e-18, a, 1.0), 0.0, 1.0), s)
    t = np.clip(t, 0.0, 1.0)
    c1 = p0 + s[:, None] * d1
    c2 = q0 + t[:, None] * d2
    return np.linalg.norm(c1 - c2, axis=1)


def _signed_point_box(pts, half):
    """Signed point-box distance in the box frame, vectorized (B, 3)."""
    q = np.abs(pts) - half
    outside = np.linalg.norm(np.maximum(q, 0.0), axis=1)
    inside = np.minimum(q.max(axis=1), 0.0)
    return outside + inside


def _to_box_frame(box_rot, box_t, pts):
    return np.einsum("bki,bk->bi", box_rot, pts - box_t)


def _capsule_box_signed(p0, p1, box_rot, box_t, half):
    """Golden-section minimum of the convex signed box distance along the
    capsule segment, vectorized over the batch."""
    a0 = _to_box_frame(box_rot, box_t, p0)
    a1 = _to_box_frame(box_rot, box_t, p1)
    seg = a1 - a0
    lo = np.zeros(a0.shape[0])
    hi = np.ones(a0.shape[0])
    m1 = hi - _GOLDEN * (hi - lo)
    m2 = lo + _GOLDEN * (hi - lo)
    g1 = _signed_point_box(a0 + m1[:, None] * seg, half)
    g2 = _signed_point_box(a0 + m2[:, None] * seg, half)
    for _ in range(GOLDEN_ITERS):
        take_lo = g1 <= g2
        hi = np.where(take_lo, m2, hi)
        lo = np.where(take_lo, lo, m1)
        m1_new = np.where(take_lo, hi - _GOLDEN * (hi - lo), m2)
        m2_new = np.where(take_lo, m1, lo + _GOLDEN * (hi - lo))
        g1_new = np.where(take_lo, _signed_point_box(a0 + m1_new[:, None] * seg, half), g2)
        g2_new = np.where(take_lo, g1, _signed_point_box(a0 + m2_new[:, None] * seg, half))
        m1, m2, g1, g2 = m1_new, m2_new, g1_new, g2_new
    ends = np.minimum(_signed_point_box(a0, half), _signed_point_box(a1, half))
    return np.minimum(np.minimum(g1, g2), ends)


def _box_box(rot_a, t_a, ha, rot_b, t_b, hb):
    """Separating-axis gap over 15 candidate axes, vectorized."""
    b = rot_a.shape[0]
    delta = t_b - t_a
    best = np.full(b, -np.inf)
    axes_list = [rot_a[:, :, i] for i in range(3)] + [rot_b[:, :, i] for i in range(3)]
    for i in range(3):
        for jj in range(3):
            cr = np.cross(rot_a[:, :, i], rot_b[:, :, jj])
            n = np.linalg.norm(cr, axis=1)
            safe = n > 1e-9
            cr = np.where(safe[:, None], cr / np.where(safe, n, 1.0)[:, None], 0.0)
            axes_list.append(cr)
    for u in axes_list:
        valid = np.einsum("bi,bi->b", u, u) > 0.5
        ra = np.einsum("bi,bij->bj", u, rot_a)
        rb = np.einsum("bi,bij->bj", u, rot_b)
        ext = np.abs(ra) @ ha + np.abs(rb) @ hb
        gap = np.abs(np.einsum("bi,bi->b", delta, u)) - ext
        best = np.where(valid, np.maximum(best, gap), best)
    return best


def pair_distances(kind, attach, pa, pb, brot, size, pairs,
                   link_rot, link_t, base_rot, base_t):
    """Signed clearance (B, n_pairs) for every packed candidate pair."""
    w_a = _world_points(attach, pa, link_rot, link_t, base_rot, base_t)
    w_b = _world_points(attach, pb, link_rot, link_t, base_rot, base_t)
    w_rot = _world_rots(attach, brot, link_rot, base_rot)
    b = link_rot.shape[0]
    out = np.empty((b, pairs.shape[0]))
    for col, (i, j) in enumerate(pairs):
        ki, kj = kind[i], kind[j]
        if ki > kj:
            i, j = j, i
            ki, kj = kj, ki
        if ki == 0 and kj == 0:  # sphere/sphere
            d = np.linalg.norm(w_a[:, i] - w_a[:, j], axis=1)
            out[:, col] = d - size[i, 0] - size[j, 0]
        elif ki == 0 and kj == 1:  # sphere/capsule
            d = _seg_point_dist(w_a[:, j], w_b[:, j], w_a[:, i])
            out[:, col] = d - size[i, 0] - size[j, 0]
        elif ki == 1 and kj == 1:  # capsule/capsule
            d = _seg_seg_dist(w_a[:, i], w_b[:, i], w_a[:, j], w_b[:, j])
            out[:, col] = d - size[i, 0] - size[j, 0]
        elif ki == 0 and kj == 2:  # sphere/box
            local = _to_box_frame(w_rot[:, j], w_a[:, j], w_a[:, i])
            out[:, col] = _signed_point_box(local, size[j]) - size[i, 0]
        elif ki == 1 and kj == 2:  # capsule/box
            out[:, col] = (
                _capsule_box_signed(w_a[:, i], w_b[:, i], w_rot[:, j], w_a[:, j], size[j])
                - size[i, 0]
            )
        else:  # box/box
            out[:, col] = _box_box(w_rot[:, i], w_a[:, i], size[i],
                                   w_rot[:, j], w_a[:, j], size[j])
    return out
