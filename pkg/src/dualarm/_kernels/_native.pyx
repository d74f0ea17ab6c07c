# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled batch kernels: forward kinematics and primitive clearances.

Mirrors the call surface of ``numpy_backend``; selected automatically at
import when built.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport INFINITY, cos, fabs, fmax, fmin, sin, sqrt

cnp.import_array()

BACKEND_NAME = "native"

cdef double GOLDEN = 0.6180339887498949
cdef int GOLDEN_ITERS = 48


cdef inline void mat_mul(const double* a, const double* b, double* out) noexcept nogil:
    cdef int i, j, k
    for i in range(3):
        for j in range(3):
            out[3 * i + j] = 0.0
            for k in range(3):
                out[3 * i + j] += a[3 * i + k] * b[3 * k + j]


cdef inline void mat_vec(const double* a, const double* v, double* out) noexcept nogil:
    cdef int i
    for i in range(3):
        out[i] = a[3 * i] * v[0] + a[3 * i + 1] * v[1] + a[3 * i + 2] * v[2]


cdef inline void rodrigues(const double* axis, double angle, double* out) noexcept nogil:
    cdef double x = axis[0], y = axis[1], z = axis[2]
    cdef double c = cos(angle), s = sin(angle), v = 1.0 - c
    out[0] = x * x * v + c
    out[1] = x * y * v - z * s
    out[2] = x * z * v + y * s
    out[3] = x * y * v + z * s
    out[4] = y * y * v + c
    out[5] = y * z * v - x * s
    out[6] = x * z * v - y * s
    out[7] = y * z * v + x * s
    out[8] = z * z * v + c


def fk_frames(const double[:, ::1] axes, const double[:, :, ::1] org_rot,
              const double[:, ::1] org_t,
              const double[:, ::1] base_rot, const double[::1] base_t,
              const double[:, :, ::1] tip_rot, const double[:, ::1] tip_t,
              int n_left, const double[:, ::1] q):
    cdef Py_ssize_t b = q.shape[0]
    cdef Py_ssize_t j = q.shape[1]
    link_rot_arr = np.empty((b, j, 3, 3))
    link_t_arr = np.empty((b, j, 3))
    eef_rot_arr = np.empty((b, 2, 3, 3))
    eef_t_arr = np.empty((b, 2, 3))
    cdef double[:, :, :, ::1] link_rot = link_rot_arr
    cdef double[:, :, ::1] link_t = link_t_arr
    cdef double[:, :, :, ::1] eef_rot = eef_rot_arr
    cdef double[:, :, ::1] eef_t = eef_t_arr

    cdef Py_ssize_t ib, k, cid, lo, hi, m
    cdef double parent_rot[9]
    cdef double parent_t[3]
    cdef double pivot_rot[9]
    cdef double pivot_t[3]
    cdef double jrot[9]
    cdef double tmp[9]
    cdef double tv[3]

    with nogil:
        for ib in range(b):
            for cid in range(2):
                lo = 0 if cid == 0 else n_left
                hi = n_left if cid == 0 else j
                for m in range(9):
                    parent_rot[m] = base_rot[m // 3, m % 3]
                for m in range(3):
                    parent_t[m] = base_t[m]
                for k in range(lo, hi):
                    mat_mul(parent_rot, &org_rot[k, 0, 0], pivot_rot)
                    mat_vec(parent_rot, &org_t[k, 0], tv)
                    for m in range(3):
                        pivot_t[m] = tv[m] + parent_t[m]
                    rodrigues(&axes[k, 0], q[ib, k], jrot)
                    mat_mul(pivot_rot, jrot, tmp)
                    for m in range(9):
                        link_rot[ib, k, m // 3, m % 3] = tmp[m]
                        parent_rot[m] = tmp[m]
                    for m in range(3):
                        link_t[ib, k, m] = pivot_t[m]
                        parent_t[m] = pivot_t[m]
                mat_mul(parent_rot, &tip_rot[cid, 0, 0], tmp)
                mat_vec(parent_rot, &tip_t[cid, 0], tv)
                for m in range(9):
                    eef_rot[ib, cid, m // 3, m % 3] = tmp[m]
                for m in range(3):
                    eef_t[ib, cid, m] = tv[m] + parent_t[m]
    return link_rot_arr, link_t_arr, eef_rot_arr, eef_t_arr


cdef inline double vnorm3(const double* v) noexcept nogil:
    return sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2])


cdef inline double vdot3(const double* a, const double* b) noexcept nogil:
    return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]


cdef inline double clampd(double x, double lo, double hi) noexcept nogil:
    return lo if x < lo else (hi if x > hi else x)


cdef double seg_point_dist(const double* p0, const double* p1, const double* pt) noexcept nogil:
    cdef double d[3]
    cdef double diff[3]
    cdef int i
    for i in range(3):
        d[i] = p1[i] - p0[i]
    cdef double denom = vdot3(d, d)
    cdef double t = 0.0
    for i in range(3):
        diff[i] = pt[i] - p0[i]
    if denom > 0.0:
        t = clampd(vdot3(diff, d) / denom, 0.0, 1.0)
    for i in range(3):
        diff[i] = pt[i] - (p0[i] + t * d[i])
    return vnorm3(diff)


cdef double seg_seg_dist(const double* p0, const double* p1,
                         const double* q0, const double* q1) noexcept nogil:
    cdef double d1[3]
    cdef double d2[3]
    cdef double r[3]
    cdef double diff[3]
    cdef int i
    for i in range(3):
        d1[i] = p1[i] - p0[i]
        d2[i] = q1[i] - q0[i]
        r[i] = p0[i] - q0[i]
    cdef double a = vdot3(d1, d1)
    cdef double e = vdot3(d2, d2)
    cdef double f = vdot3(d2, r)
    cdef double c = vdot3(d1, r)
    cdef double bb = vdot3(d1, d2)
    cdef double denom = a * e - bb * bb
    cdef double s = 0.0
    cdef double t = 0.0
    if a <= 1e-18 and e <= 1e-18:
        return vnorm3(r)
    if a <= 1e-18:
        t = clampd(f / e, 0.0, 1.0)
    elif e <= 1e-18:
        s = clampd(-c / a, 0.0, 1.0)
    else:
        if denom > 1e-18:
            s = clampd((bb * f - c * e) / denom, 0.0, 1.0)
        t = (bb * s + f) / e
        if t < 0.0:
            t = 0.0
            s = clampd(-c / a, 0.0, 1.0)
        elif t > 1.0:
            t = 1.0
            s = clampd((bb - c) / a, 0.0, 1.0)
    for i in range(3):
        diff[i] = (p0[i] + s * d1[i]) - (q0[i] + t * d2[i])
    return vnorm3(diff)


cdef double signed_point_box(const double* p, const double* half) noexcept nogil:
    cdef double q[3]
    cdef double m[3]
    cdef int i
    cdef double inside
    for i in range(3):
        q[i] = fabs(p[i]) - half[i]
        m[i] = fmax(q[i], 0.0)
    inside = fmin(fmax(q[0], fmax(q[1], q[2])), 0.0)
    return vnorm3(m) + inside


cdef double capsule_box_signed(const double* a0, const double* a1, const double* half) noexcept nogil:
    """Golden-section minimum of the convex signed box distance along a
    segment already expressed in the box frame."""
    cdef double seg[3]
    cdef double pt[3]
    cdef int i, it
    for i in range(3):
        seg[i] = a1[i] - a0[i]
    cdef double lo = 0.0, hi = 1.0
    cdef double m1 = hi - GOLDEN * (hi - lo)
    cdef double m2 = lo + GOLDEN * (hi - lo)
    cdef double g1, g2, best
    for i in range(3):
        pt[i] = a0[i] + m1 * seg[i]
    g1 = signed_point_box(pt, half)
    for i in range(3):
        pt[i] = a0[i] + m2 * seg[i]
    g2 = signed_point_box(pt, half)
    for it in range(GOLDEN_ITERS):
        if g1 <= g2:
            hi = m2
            m2 = m1
            g2 = g1
            m1 = hi - GOLDEN * (hi - lo)
            for i in range(3):
                pt[i] = a0[i] + m1 * seg[i]
            g1 = signed_point_box(pt, half)
        else:
            lo = m1
            m1 = m2
            g1 = g2
            m2 = lo + GOLDEN * (hi - lo)
            for i in range(3):
                pt[i] = a0[i] + m2 * seg[i]
            g2 = signed_point_box(pt, half)
    best = fmin(g1, g2)
    best = fmin(best, signed_point_box(a0, half))
    best = fmin(best, signed_point_box(a1, half))
    return best


cdef double box_box_gap(const double* rot_a, const double* t_a, const double* ha,
                        const double* rot_b, const double* t_b, const double* hb) noexcept nogil:
    cdef double delta[3]
    cdef double u[3]
    cdef double ca[3]
    cdef double cb[3]
    cdef double best = -INFINITY
    cdef double n, ra, rb, gap
    cdef int i, jj, k
    for i in range(3):
        delta[i] = t_b[i] - t_a[i]
    for k in range(15):
        if k < 3:
            for i in range(3):
                u[i] = rot_a[3 * i + k]
        elif k < 6:
            for i in range(3):
                u[i] = rot_b[3 * i + (k - 3)]
        else:
            i = (k - 6) // 3
            jj = (k - 6) % 3
            for_cross(rot_a, i, rot_b, jj, u)
            n = vnorm3(u)
            if n <= 1e-9:
                continue
            u[0] /= n
            u[1] /= n
            u[2] /= n
        for i in range(3):
            ca[i] = fabs(rot_a[i] * u[0] + rot_a[3 + i] * u[1] + rot_a[6 + i] * u[2])
            cb[i] = fabs(rot_b[i] * u[0] + rot_b[3 + i] * u[1] + rot_b[6 + i] * u[2])
        ra = ca[0] * ha[0] + ca[1] * ha[1] + ca[2] * ha[2]
        rb = cb[0] * hb[0] + cb[1] * hb[1] + cb[2] * hb[2]
        gap = fabs(vdot3(delta, u)) - ra - rb
        best = fmax(best, gap)
    return best


cdef inline void for_cross(const double* rot_a, int col_a, const double* rot_b, int col_b,
                           double* out) noexcept nogil:
    cdef double a0 = rot_a[col_a], a1 = rot_a[3 + col_a], a2 = rot_a[6 + col_a]
    cdef double b0 = rot_b[col_b], b1 = rot_b[3 + col_b], b2 = rot_b[6 + col_b]
    out[0] = a1 * b2 - a2 * b1
    out[1] = a2 * b0 - a0 * b2
    out[2] = a0 * b1 - a1 * b0


def pair_distances(const int[::1] kind, const int[::1] attach,
                   const double[:, ::1] pa, const double[:, ::1] pb,
                   const double[:, :, ::1] brot, const double[:, ::1] size,
                   const int[:, ::1] pairs,
                   const double[:, :, :, ::1] link_rot, const double[:, :, ::1] link_t,
                   const double[:, ::1] base_rot, const double[::1] base_t):
    cdef Py_ssize_t b = link_rot.shape[0]
    cdef Py_ssize_t j = link_rot.shape[1]
    cdef Py_ssize_t nb = kind.shape[0]
    cdef Py_ssize_t np_pairs = pairs.shape[0]
    out_arr = np.empty((b, np_pairs))
    cdef double[:, ::1] out = out_arr
    w_a_arr = np.empty((nb, 3))
    w_b_arr = np.empty((nb, 3))
    w_rot_arr = np.empty((nb, 3, 3))
    cdef double[:, ::1] w_a = w_a_arr
    cdef double[:, ::1] w_b = w_b_arr
    cdef double[:, :, ::1] w_rot = w_rot_arr

    cdef Py_ssize_t ib, ibody, col, i2, jbody
    cdef int att, ki, kj, swap
    cdef double local0[3]
    cdef double local1[3]
    cdef double d
    cdef double rot_buf[9]

    with nogil:
        for ib in range(b):
            # world pose of every body at configuration ib
            for ibody in range(nb):
                att = attach[ibody]
                if att < 0:
                    for i2 in range(3):
                        w_a[ibody, i2] = pa[ibody, i2]
                        w_b[ibody, i2] = pb[ibody, i2]
                        w_rot[ibody, i2, 0] = brot[ibody, i2, 0]
                        w_rot[ibody, i2, 1] = brot[ibody, i2, 1]
                        w_rot[ibody, i2, 2] = brot[ibody, i2, 2]
                elif att == <int> j:
                    mat_vec(&base_rot[0, 0], &pa[ibody, 0], local0)
                    mat_vec(&base_rot[0, 0], &pb[ibody, 0], local1)
                    for i2 in range(3):
                        w_a[ibody, i2] = local0[i2] + base_t[i2]
                        w_b[ibody, i2] = local1[i2] + base_t[i2]
                    mat_mul(&base_rot[0, 0], &brot[ibody, 0, 0], &w_rot[ibody, 0, 0])
                else:
                    mat_vec(&link_rot[ib, att, 0, 0], &pa[ibody, 0], local0)
                    mat_vec(&link_rot[ib, att, 0, 0], &pb[ibody, 0], local1)
                    for i2 in range(3):
                        w_a[ibody, i2] = local0[i2] + link_t[ib, att, i2]
                        w_b[ibody, i2] = local1[i2] + link_t[ib, att, i2]
                    mat_mul(&link_rot[ib, att, 0, 0], &brot[ibody, 0, 0], &w_rot[ibody, 0, 0])
            for col in range(np_pairs):
                ibody = pairs[col, 0]
                jbody = pairs[col, 1]
                ki = kind[ibody]
                kj = kind[jbody]
                if ki > kj:
                    swap = <int> ibody
                    ibody = jbody
                    jbody = swap
                    swap = ki
                    ki = kj
                    kj = swap
                if ki == 0 and kj == 0:
                    for i2 in range(3):
                        local0[i2] = w_a[ibody, i2] - w_a[jbody, i2]
                    d = vnorm3(local0) - size[ibody, 0] - size[jbody, 0]
                elif ki == 0 and kj == 1:
                    d = (seg_point_dist(&w_a[jbody, 0], &w_b[jbody, 0], &w_a[ibody, 0])
                         - size[ibody, 0] - size[jbody, 0])
                elif ki == 1 and kj == 1:
                    d = (seg_seg_dist(&w_a[ibody, 0], &w_b[ibody, 0],
                                      &w_a[jbody, 0], &w_b[jbody, 0])
                         - size[ibody, 0] - size[jbody, 0])
                elif ki == 0 and kj == 2:
                    to_box_frame(&w_rot[jbody, 0, 0], &w_a[jbody, 0], &w_a[ibody, 0], local0)
                    d = signed_point_box(local0, &size[jbody, 0]) - size[ibody, 0]
                elif ki == 1 and kj == 2:
                    to_box_frame(&w_rot[jbody, 0, 0], &w_a[jbody, 0], &w_a[ibody, 0], local0)
                    to_box_frame(&w_rot[jbody, 0, 0], &w_a[jbody, 0], &w_b[ibody, 0], local1)
                    d = capsule_box_signed(local0, local1, &size[jbody, 0]) - size[ibody, 0]
                else:
                    for i2 in range(9):
                        rot_buf[i2] = w_rot[ibody, i2 // 3, i2 % 3]
                    d = box_box_gap(rot_buf, &w_a[ibody, 0], &size[ibody, 0],
                                    &w_rot[jbody, 0, 0], &w_a[jbody, 0], &size[jbody, 0])
                out[ib, col] = d
    return out_arr


cdef inline void to_box_frame(const double* rot, const double* t, const double* p,
                              double* out) noexcept nogil:
    cdef double diff[3]
    cdef int i
    for i in range(3):
        diff[i] = p[i] - t[i]
    # rot is world-from-box: apply transpose
    out[0] = rot[0] * diff[0] + rot[3] * diff[1] + rot[6] * diff[2]
    out[1] = rot[1] * diff[0] + rot[4] * diff[1] + rot[7] * diff[2]
    out[2] = rot[2] * diff[0] + rot[5] * diff[1] + rot[8] * diff[2]


def gravity_torques(const double[:, ::1] axes, const double[:, ::1] com,
                    const double[::1] mass, int n_left, double gravity,
                    const double[:, :, :, ::1] link_rot,
                    const double[:, :, ::1] link_t):
    """Signed gravity torques (B, J): gradient of gravitational potential
    energy w.r.t. joint angles."""
    cdef Py_ssize_t b = link_rot.shape[0]
    cdef Py_ssize_t j = link_rot.shape[1]
    out_arr = np.empty((b, j))
    cdef double[:, ::1] out = out_arr
    cdef Py_ssize_t ib, k, cid, lo, hi
    cdef double sum_m, sum_mcx, sum_mcy
    cdef double cx, cy, ax_x, ax_y, mom_x, mom_y
    with nogil:
        for ib in range(b):
            for cid in range(2):
                lo = 0 if cid == 0 else n_left
                hi = n_left if cid == 0 else j
                sum_m = 0.0
                sum_mcx = 0.0
                sum_mcy = 0.0
                for k in range(hi - 1, lo - 1, -1):
                    cx = (link_rot[ib, k, 0, 0] * com[k, 0]
                          + link_rot[ib, k, 0, 1] * com[k, 1]
                          + link_rot[ib, k, 0, 2] * com[k, 2] + link_t[ib, k, 0])
                    cy = (link_rot[ib, k, 1, 0] * com[k, 0]
                          + link_rot[ib, k, 1, 1] * com[k, 1]
                          + link_rot[ib, k, 1, 2] * com[k, 2] + link_t[ib, k, 1])
                    sum_m += mass[k]
                    sum_mcx += mass[k] * cx
                    sum_mcy += mass[k] * cy
                    ax_x = (link_rot[ib, k, 0, 0] * axes[k, 0]
                            + link_rot[ib, k, 0, 1] * axes[k, 1]
                            + link_rot[ib, k, 0, 2] * axes[k, 2])
                    ax_y = (link_rot[ib, k, 1, 0] * axes[k, 0]
                            + link_rot[ib, k, 1, 1] * axes[k, 1]
                            + link_rot[ib, k, 1, 2] * axes[k, 2])
                    mom_x = sum_mcx - sum_m * link_t[ib, k, 0]
                    mom_y = sum_mcy - sum_m * link_t[ib, k, 1]
                    out[ib, k] = gravity * (ax_x * mom_y - ax_y * mom_x)
    return out_arr
