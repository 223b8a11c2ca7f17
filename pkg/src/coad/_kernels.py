"""Compiled inner loops for collision checking.

These mirror the vectorised numpy kernels in :mod:`coad.world`, which stay
the reference implementation; the compiled versions exist only because the
planner calls them tens of thousands of times on a handful of points each.
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit

_EPS = 1e-12


@njit(cache=True)
def _clip01(x):
    return 0.0 if x < 0.0 else (1.0 if x > 1.0 else x)


@njit(cache=True)
def seg_point_dist(ax, ay, az, bx, by, bz, px, py, pz):
    dx, dy, dz = bx - ax, by - ay, bz - az
    dd = dx * dx + dy * dy + dz * dz
    t = ((px - ax) * dx + (py - ay) * dy + (pz - az) * dz) / max(dd, _EPS)
    t = _clip01(t)
    ex = px - (ax + t * dx)
    ey = py - (ay + t * dy)
    ez = pz - (az + t * dz)
    return math.sqrt(ex * ex + ey * ey + ez * ez)


@njit(cache=True)
def seg_seg_dist(p1, q1, p2, q2):
    d1 = q1 - p1
    d2 = q2 - p2
    r = p1 - p2
    a = d1[0] * d1[0] + d1[1] * d1[1] + d1[2] * d1[2]
    e = d2[0] * d2[0] + d2[1] * d2[1] + d2[2] * d2[2]
    f = d2[0] * r[0] + d2[1] * r[1] + d2[2] * r[2]
    if a <= _EPS and e <= _EPS:
        s = 0.0
        t = 0.0
    elif a <= _EPS:
        s = 0.0
        t = _clip01(f / e)
    else:
        c = d1[0] * r[0] + d1[1] * r[1] + d1[2] * r[2]
        if e <= _EPS:
            t = 0.0
            s = _clip01(-c / a)
        else:
            b = d1[0] * d2[0] + d1[1] * d2[1] + d1[2] * d2[2]
            denom = a * e - b * b
            s = _clip01((b * f - c * e) / denom) if denom > _EPS else 0.0
            t = (b * s + f) / e
            if t < 0.0:
                t = 0.0
                s = _clip01(-c / a)
            elif t > 1.0:
                t = 1.0
                s = _clip01((b - c) / a)
    x = p1[0] + s * d1[0] - p2[0] - t * d2[0]
    y = p1[1] + s * d1[1] - p2[1] - t * d2[1]
    z = p1[2] + s * d1[2] - p2[2] - t * d2[2]
    return math.sqrt(x * x + y * y + z * z)


@njit(cache=True)
def _box_sqdist_at(a, d, t, lo, hi):
    s = 0.0
    for k in range(3):
        v = a[k] + t * d[k]
        if v < lo[k]:
            s += (lo[k] - v) ** 2
        elif v > hi[k]:
            s += (v - hi[k]) ** 2
    return s


@njit(cache=True)
def seg_box_dist(a, b, lo, hi):
    """Exact segment/box distance by minimising each quadratic piece between face crossings."""
    d = b - a
    knots = np.empty(8)
    knots[0] = 0.0
    knots[1] = 1.0
    m = 2
    for k in range(3):
        if d[k] != 0.0:
            for bound in (lo[k], hi[k]):
                t = (bound - a[k]) / d[k]
                if 0.0 < t < 1.0:
                    knots[m] = t
                    m += 1
    ks = np.sort(knots[:m])
    best = np.inf
    for i in range(m - 1):
        t0, t1 = ks[i], ks[i + 1]
        mid = 0.5 * (t0 + t1)
        num = 0.0
        den = 0.0
        for k in range(3):
            v = a[k] + mid * d[k]
            if v < lo[k]:
                num -= d[k] * (a[k] - lo[k])
                den += d[k] * d[k]
            elif v > hi[k]:
                num -= d[k] * (a[k] - hi[k])
                den += d[k] * d[k]
        ts = num / den if den > _EPS else mid
        ts = min(max(ts, t0), t1)
        v = _box_sqdist_at(a, d, ts, lo, hi)
        if v < best:
            best = v
    return math.sqrt(best)


@njit(cache=True)
def _mat3(M, N, out):
    for r in range(3):
        for c in range(3):
            out[r, c] = M[r, 0] * N[0, c] + M[r, 1] * N[1, c] + M[r, 2] * N[2, c]


@njit(cache=True)
def _affine(R, x, t, out):
    for r in range(3):
        out[r] = R[r, 0] * x[0] + R[r, 1] * x[1] + R[r, 2] * x[2] + t[r]


@njit(cache=True)
def link_world(q, origins, axes, link, la, lb, A, B):
    """Write world capsule endpoints of one configuration into ``A``/``B``."""
    n = q.shape[0]
    Rw = np.eye(3)
    pw = np.zeros(3)
    Rf = np.empty((n, 3, 3))
    pf = np.empty((n, 3))
    Rj = np.empty((3, 3))
    M = np.empty((3, 3))
    tmp = np.empty(3)
    for i in range(n):
        O = origins[i]
        _affine(Rw, O[:3, 3], pw, tmp)
        pw[:] = tmp
        c, s = math.cos(q[i]), math.sin(q[i])
        kx, ky, kz = axes[i, 0], axes[i, 1], axes[i, 2]
        v = 1.0 - c
        Rj[0, 0] = c + kx * kx * v
        Rj[0, 1] = kx * ky * v - kz * s
        Rj[0, 2] = kx * kz * v + ky * s
        Rj[1, 0] = ky * kx * v + kz * s
        Rj[1, 1] = c + ky * ky * v
        Rj[1, 2] = ky * kz * v - kx * s
        Rj[2, 0] = kz * kx * v - ky * s
        Rj[2, 1] = kz * ky * v + kx * s
        Rj[2, 2] = c + kz * kz * v
        _mat3(O[:3, :3], Rj, M)
        _mat3(Rw, M, Rf[i])
        Rw[:] = Rf[i]
        pf[i] = pw
    for j in range(link.shape[0]):
        _affine(Rf[link[j]], la[j], pf[link[j]], A[j])
        _affine(Rf[link[j]], lb[j], pf[link[j]], B[j])


@njit(cache=True)
def config_clearance(q, origins, axes, link, la, lb, lr, sc, sr, ca, cb, cr,
                     box_R, box_t, box_lo, box_hi, pairs, stop_below):
    """Signed clearance of one configuration; returns early once it drops to ``stop_below``."""
    L = link.shape[0]
    A = np.empty((L, 3))
    B = np.empty((L, 3))
    link_world(q, origins, axes, link, la, lb, A, B)
    a = np.empty(3)
    b = np.empty(3)
    best = np.inf
    for j in range(L):
        for k in range(sc.shape[0]):
            d = seg_point_dist(A[j, 0], A[j, 1], A[j, 2], B[j, 0], B[j, 1], B[j, 2],
                               sc[k, 0], sc[k, 1], sc[k, 2]) - lr[j] - sr[k]
            if d < best:
                best = d
                if best <= stop_below:
                    return best
        for k in range(ca.shape[0]):
            d = seg_seg_dist(A[j], B[j], ca[k], cb[k]) - lr[j] - cr[k]
            if d < best:
                best = d
                if best <= stop_below:
                    return best
        for k in range(box_R.shape[0]):
            _affine(box_R[k], A[j], box_t[k], a)
            _affine(box_R[k], B[j], box_t[k], b)
            d = seg_box_dist(a, b, box_lo[k], box_hi[k]) - lr[j]
            if d < best:
                best = d
                if best <= stop_below:
                    return best
    for k in range(pairs.shape[0]):
        i, j = pairs[k, 0], pairs[k, 1]
        d = seg_seg_dist(A[i], B[i], A[j], B[j]) - lr[i] - lr[j]
        if d < best:
            best = d
            if best <= stop_below:
                return best
    return best


@njit(cache=True)
def clearance_batch(Q, origins, axes, link, la, lb, lr, sc, sr, ca, cb, cr,
                    box_R, box_t, box_lo, box_hi, pairs):
    out = np.empty(Q.shape[0])
    for i in range(Q.shape[0]):
        out[i] = config_clearance(Q[i], origins, axes, link, la, lb, lr, sc, sr, ca, cb, cr,
                                  box_R, box_t, box_lo, box_hi, pairs, -np.inf)
    return out


@njit(cache=True)
def first_invalid(Q, origins, axes, link, la, lb, lr, sc, sr, ca, cb, cr,
                  box_R, box_t, box_lo, box_hi, pairs):
    """Index of the first configuration with clearance <= 0, or -1."""
    for i in range(Q.shape[0]):
        d = config_clearance(Q[i], origins, axes, link, la, lb, lr, sc, sr, ca, cb, cr,
                             box_R, box_t, box_lo, box_hi, pairs, 0.0)
        if d <= 0.0:
            return i
    return -1


@njit(cache=True)
def path_first_invalid(path, resolution, origins, axes, link, la, lb, lr, sc, sr, ca, cb, cr,
                       box_R, box_t, box_lo, box_hi, pairs):
    """Like :func:`first_invalid` over the densified polyline; returns the edge index or -1.

    Subdivision follows ``world.edge_subdivisions`` so both paths test the
    same configurations.
    """
    n_pts, dof = path.shape
    q = np.empty(dof)
    for e in range(n_pts - 1):
        m = 0.0
        for j in range(dof):
            m = max(m, abs(path[e + 1, j] - path[e, j]))
        ratio = max(m / resolution, 1.0)
        k = int(2.0 ** math.ceil(math.log2(ratio) - 1e-12))
        for i in range(k):
            t = i / k
            for j in range(dof):
                q[j] = (1.0 - t) * path[e, j] + t * path[e + 1, j]
            if config_clearance(q, origins, axes, link, la, lb, lr, sc, sr, ca, cb, cr,
                                box_R, box_t, box_lo, box_hi, pairs, 0.0) <= 0.0:
                return e
    if config_clearance(path[n_pts - 1], origins, axes, link, la, lb, lr, sc, sr, ca, cb, cr,
                        box_R, box_t, box_lo, box_hi, pairs, 0.0) <= 0.0:
        return max(n_pts - 2, 0)
    return -1


@njit(cache=True)
def _chain_ee(q, origins, axes, ee, Z, P, R_out, p_out):
    """End-effector rotation/position plus world joint axes ``Z`` and origins ``P``."""
    n = q.shape[0]
    Rw = np.eye(3)
    pw = np.zeros(3)
    Rj = np.empty((3, 3))
    M = np.empty((3, 3))
    R2 = np.empty((3, 3))
    tmp = np.empty(3)
    for i in range(n):
        O = origins[i]
        _affine(Rw, O[:3, 3], pw, tmp)
        pw[:] = tmp
        c, s = math.cos(q[i]), math.sin(q[i])
        kx, ky, kz = axes[i, 0], axes[i, 1], axes[i, 2]
        v = 1.0 - c
        Rj[0, 0] = c + kx * kx * v
        Rj[0, 1] = kx * ky * v - kz * s
        Rj[0, 2] = kx * kz * v + ky * s
        Rj[1, 0] = ky * kx * v + kz * s
        Rj[1, 1] = c + ky * ky * v
        Rj[1, 2] = ky * kz * v - kx * s
        Rj[2, 0] = kz * kx * v - ky * s
        Rj[2, 1] = kz * ky * v + kx * s
        Rj[2, 2] = c + kz * kz * v
        _mat3(O[:3, :3], Rj, M)
        _mat3(Rw, M, R2)
        Rw[:] = R2
        for r in range(3):
            Z[i, r] = Rw[r, 0] * kx + Rw[r, 1] * ky + Rw[r, 2] * kz
            P[i, r] = pw[r]
    _mat3(Rw, ee[:3, :3], R_out)
    _affine(Rw, ee[:3, 3], pw, p_out)


@njit(cache=True)
def rotation_error(Rt, R, out):
    """Rotation vector of ``Rt @ R.T`` (world frame), written to ``out``."""
    E = np.empty((3, 3))
    for r in range(3):
        for c in range(3):
            E[r, c] = Rt[r, 0] * R[c, 0] + Rt[r, 1] * R[c, 1] + Rt[r, 2] * R[c, 2]
    cos = min(1.0, max(-1.0, (E[0, 0] + E[1, 1] + E[2, 2] - 1.0) * 0.5))
    angle = math.acos(cos)
    vx, vy, vz = E[2, 1] - E[1, 2], E[0, 2] - E[2, 0], E[1, 0] - E[0, 1]
    s = math.sin(angle)
    if s < 1e-7:
        if cos > 0:
            out[0], out[1], out[2] = 0.5 * vx, 0.5 * vy, 0.5 * vz
            return
        k = 0
        for i in range(1, 3):
            if E[i, i] > E[k, k]:
                k = i
        mkk = 0.5 * (E[k, k] + 1.0)
        norm = math.sqrt(max(mkk, 1e-300))
        for i in range(3):
            m = 0.5 * (E[i, k] + (1.0 if i == k else 0.0))
            out[i] = angle * m / norm
        return
    f = angle / (2.0 * s)
    out[0], out[1], out[2] = vx * f, vy * f, vz * f


@njit(cache=True)
def dls_ik(q0, Rt, pt, origins, axes, ee, lower, upper, damping, max_step, max_iter,
           refine_tol, stall_ratio, stall_limit, stall_window):
    """Damped least-squares iterations; returns ``(q, pos_err, rot_err)`` of the last iterate."""
    n = q0.shape[0]
    q = q0.copy()
    Z = np.empty((n, 3))
    P = np.empty((n, 3))
    Re = np.empty((3, 3))
    pe = np.empty(3)
    e = np.empty(6)
    rv = np.empty(3)
    J = np.empty((6, n))
    A = np.empty((6, 6))
    hist = np.empty(max_iter + 1)
    lam2 = damping * damping
    best = np.inf
    stall = 0
    pos_err = np.inf
    rot_err = np.inf
    for it in range(max_iter + 1):
        _chain_ee(q, origins, axes, ee, Z, P, Re, pe)
        for r in range(3):
            e[r] = pt[r] - pe[r]
        rotation_error(Rt, Re, rv)
        e[3], e[4], e[5] = rv[0], rv[1], rv[2]
        pos_err = math.sqrt(e[0] * e[0] + e[1] * e[1] + e[2] * e[2])
        rot_err = math.sqrt(e[3] * e[3] + e[4] * e[4] + e[5] * e[5])
        total = pos_err + rot_err
        if total < refine_tol or it == max_iter:
            break
        if total > best * (1.0 - stall_ratio):
            stall += 1
            if stall >= stall_limit:
                break
        else:
            stall = 0
        best = min(best, total)
        hist[it] = total
        if it >= stall_window and total > 0.5 * hist[it - stall_window]:
            break
        for i in range(n):
            dx = pe[0] - P[i, 0]
            dy = pe[1] - P[i, 1]
            dz = pe[2] - P[i, 2]
            J[0, i] = Z[i, 1] * dz - Z[i, 2] * dy
            J[1, i] = Z[i, 2] * dx - Z[i, 0] * dz
            J[2, i] = Z[i, 0] * dy - Z[i, 1] * dx
            J[3, i] = Z[i, 0]
            J[4, i] = Z[i, 1]
            J[5, i] = Z[i, 2]
        for r in range(6):
            for c in range(6):
                acc = 0.0
                for i in range(n):
                    acc += J[r, i] * J[c, i]
                A[r, c] = acc + (lam2 if r == c else 0.0)
        y = np.linalg.solve(A, e)
        m = 0.0
        dq = np.empty(n)
        for i in range(n):
            acc = 0.0
            for r in range(6):
                acc += J[r, i] * y[r]
            dq[i] = acc
            m = max(m, abs(acc))
        scale = max_step / m if m > max_step else 1.0
        for i in range(n):
            v = q[i] + dq[i] * scale
            q[i] = min(max(v, lower[i]), upper[i])
    return q, pos_err, rot_err
