"""Numba-jitted kernels: per-edge loops over the same math as _kernels_numpy.
Default backend when numba imports cleanly; first call pays a one-off compile
that is cached on disk.

3x3 and 6x6 products are unrolled or looped in place (BLAS dispatch dominates
at these sizes) and all scratch buffers live outside the edge loop.
"""

from __future__ import annotations

import numpy as np
from numba import njit

_SMALL = 1e-6


@njit(cache=True, inline="always")
def _skew_into(v, out):
    out[0, 0] = 0.0
    out[0, 1] = -v[2]
    out[0, 2] = v[1]
    out[1, 0] = v[2]
    out[1, 1] = 0.0
    out[1, 2] = -v[0]
    out[2, 0] = -v[1]
    out[2, 1] = v[0]
    out[2, 2] = 0.0


@njit(cache=True, inline="always")
def _mm3(A, B, out):
    for i in range(3):
        a0 = A[i, 0]
        a1 = A[i, 1]
        a2 = A[i, 2]
        out[i, 0] = a0 * B[0, 0] + a1 * B[1, 0] + a2 * B[2, 0]
        out[i, 1] = a0 * B[0, 1] + a1 * B[1, 1] + a2 * B[2, 1]
        out[i, 2] = a0 * B[0, 2] + a1 * B[1, 2] + a2 * B[2, 2]


@njit(cache=True, inline="always")
def _mm3_tn(A, B, out):
    # A^T @ B
    for i in range(3):
        a0 = A[0, i]
        a1 = A[1, i]
        a2 = A[2, i]
        out[i, 0] = a0 * B[0, 0] + a1 * B[1, 0] + a2 * B[2, 0]
        out[i, 1] = a0 * B[0, 1] + a1 * B[1, 1] + a2 * B[2, 1]
        out[i, 2] = a0 * B[0, 2] + a1 * B[1, 2] + a2 * B[2, 2]


@njit(cache=True, inline="always")
def _mv3(A, v, out):
    out[0] = A[0, 0] * v[0] + A[0, 1] * v[1] + A[0, 2] * v[2]
    out[1] = A[1, 0] * v[0] + A[1, 1] * v[1] + A[1, 2] * v[2]
    out[2] = A[2, 0] * v[0] + A[2, 1] * v[1] + A[2, 2] * v[2]


@njit(cache=True, inline="always")
def _mv3_tn(A, v, out):
    out[0] = A[0, 0] * v[0] + A[1, 0] * v[1] + A[2, 0] * v[2]
    out[1] = A[0, 1] * v[0] + A[1, 1] * v[1] + A[2, 1] * v[2]
    out[2] = A[0, 2] * v[0] + A[1, 2] * v[1] + A[2, 2] * v[2]


@njit(cache=True, inline="always")
def _so3_exp_into(phi, K, K2, out):
    angle = np.sqrt(phi[0] ** 2 + phi[1] ** 2 + phi[2] ** 2)
    if angle < _SMALL:
        c1 = 1.0 - angle * angle / 6.0
        c2 = 0.5 - angle * angle / 24.0
    else:
        c1 = np.sin(angle) / angle
        c2 = (1.0 - np.cos(angle)) / (angle * angle)
    _skew_into(phi, K)
    _mm3(K, K, K2)
    for i in range(3):
        for j in range(3):
            out[i, j] = c1 * K[i, j] + c2 * K2[i, j]
        out[i, i] += 1.0


@njit(cache=True)
def _so3_log_into(R, out):
    # via quaternion (Shepperd); stable through angle = pi
    tr = R[0, 0] + R[1, 1] + R[2, 2]
    if tr > 0.0:
        s = np.sqrt(tr + 1.0) * 2.0
        qw = 0.25 * s
        qx = (R[2, 1] - R[1, 2]) / s
        qy = (R[0, 2] - R[2, 0]) / s
        qz = (R[1, 0] - R[0, 1]) / s
    elif R[0, 0] >= R[1, 1] and R[0, 0] >= R[2, 2]:
        s = np.sqrt(1.0 + R[0, 0] - R[1, 1] - R[2, 2]) * 2.0
        qw = (R[2, 1] - R[1, 2]) / s
        qx = 0.25 * s
        qy = (R[0, 1] + R[1, 0]) / s
        qz = (R[0, 2] + R[2, 0]) / s
    elif R[1, 1] >= R[2, 2]:
        s = np.sqrt(1.0 + R[1, 1] - R[0, 0] - R[2, 2]) * 2.0
        qw = (R[0, 2] - R[2, 0]) / s
        qx = (R[0, 1] + R[1, 0]) / s
        qy = 0.25 * s
        qz = (R[1, 2] + R[2, 1]) / s
    else:
        s = np.sqrt(1.0 + R[2, 2] - R[0, 0] - R[1, 1]) * 2.0
        qw = (R[1, 0] - R[0, 1]) / s
        qx = (R[0, 2] + R[2, 0]) / s
        qy = (R[1, 2] + R[2, 1]) / s
        qz = 0.25 * s
    n = np.sqrt(qw * qw + qx * qx + qy * qy + qz * qz)
    qw /= n
    qx /= n
    qy /= n
    qz /= n
    if qw < 0.0:
        qw = -qw
        qx = -qx
        qy = -qy
        qz = -qz
    sv = np.sqrt(qx * qx + qy * qy + qz * qz)
    if sv < _SMALL:
        k = (2.0 / qw) * (1.0 - sv * sv / (3.0 * qw * qw))
    else:
        k = 2.0 * np.arctan2(sv, qw) / sv
    out[0] = k * qx
    out[1] = k * qy
    out[2] = k * qz


@njit(cache=True, inline="always")
def _so3_v_into(phi, K, K2, out):
    angle = np.sqrt(phi[0] ** 2 + phi[1] ** 2 + phi[2] ** 2)
    if angle < _SMALL:
        c1 = 0.5 - angle * angle / 24.0
        c2 = 1.0 / 6.0 - angle * angle / 120.0
    else:
        a2 = angle * angle
        c1 = (1.0 - np.cos(angle)) / a2
        c2 = (angle - np.sin(angle)) / (a2 * angle)
    _skew_into(phi, K)
    _mm3(K, K, K2)
    for i in range(3):
        for j in range(3):
            out[i, j] = c1 * K[i, j] + c2 * K2[i, j]
        out[i, i] += 1.0


@njit(cache=True, inline="always")
def _so3_v_inv_into(phi, K, K2, out):
    angle = np.sqrt(phi[0] ** 2 + phi[1] ** 2 + phi[2] ** 2)
    if angle < _SMALL:
        c = 1.0 / 12.0 + angle * angle / 720.0
    else:
        a2 = angle * angle
        c = 1.0 / a2 - (1.0 + np.cos(angle)) / (2.0 * angle * np.sin(angle))
    _skew_into(phi, K)
    _mm3(K, K, K2)
    for i in range(3):
        for j in range(3):
            out[i, j] = -0.5 * K[i, j] + c * K2[i, j]
        out[i, i] += 1.0


@njit(cache=True)
def _q_block_into(rho, phi, P, H, W1, W2, W3, W4, out):
    angle = np.sqrt(phi[0] ** 2 + phi[1] ** 2 + phi[2] ** 2)
    if angle < 1e-3:
        m2 = 1.0 / 6.0 - angle * angle / 120.0
        m3 = 1.0 / 24.0 - angle * angle / 720.0
        m4 = -1.0 / 120.0 + angle * angle / 5040.0
    else:
        a2 = angle * angle
        a3 = a2 * angle
        a4 = a3 * angle
        a5 = a4 * angle
        m2 = (angle - np.sin(angle)) / a3
        m3 = (a2 / 2.0 + np.cos(angle) - 1.0) / a4
        m4 = (angle - np.sin(angle) - a3 / 6.0) / a5
    m5 = 0.5 * (m3 + 3.0 * m4)
    _skew_into(phi, P)
    _skew_into(rho, H)
    _mm3(P, H, W1)  # PH
    _mm3(H, P, W2)  # HP
    _mm3(W1, P, W3)  # PHP
    _mm3(P, P, W4)  # PP
    for i in range(3):
        for j in range(3):
            # T1 = PH + HP + PHP ; accumulated directly
            out[i, j] = 0.5 * H[i, j] + m2 * (W1[i, j] + W2[i, j] + W3[i, j])
    # T2 = PP@H + HP@P - 3 PHP, T3 = PHP@P + PP@HP reuse W1 as scratch
    _mm3(W4, H, W1)  # PP@H
    for i in range(3):
        for j in range(3):
            out[i, j] += m3 * (W1[i, j] - 3.0 * W3[i, j])
    _mm3(W2, P, W1)  # HP@P
    for i in range(3):
        for j in range(3):
            out[i, j] += m3 * W1[i, j]
    _mm3(W3, P, W1)  # PHP@P
    _mm3(W4, W2, W3)  # PP@HP
    for i in range(3):
        for j in range(3):
            out[i, j] += m5 * (W1[i, j] + W3[i, j])


@njit(cache=True, inline="always")
def _mm6_into(A, B, out):
    for i in range(6):
        for j in range(6):
            acc = 0.0
            for k in range(6):
                acc += A[i, k] * B[k, j]
            out[i, j] = acc


@njit(cache=True)
def edge_residuals(Rf, tf, Rt, tt, Rm, tm):
    E = Rf.shape[0]
    out = np.empty((E, 6))
    Rp = np.empty((3, 3))
    Re = np.empty((3, 3))
    K = np.empty((3, 3))
    K2 = np.empty((3, 3))
    Vi = np.empty((3, 3))
    tp = np.empty(3)
    te = np.empty(3)
    d = np.empty(3)
    phi = np.empty(3)
    for e in range(E):
        _mm3(Rf[e], Rm[e], Rp)
        _mv3(Rf[e], tm[e], tp)
        tp[0] += tf[e, 0]
        tp[1] += tf[e, 1]
        tp[2] += tf[e, 2]
        _mm3_tn(Rp, Rt[e], Re)
        d[0] = tt[e, 0] - tp[0]
        d[1] = tt[e, 1] - tp[1]
        d[2] = tt[e, 2] - tp[2]
        _mv3_tn(Rp, d, te)
        _so3_log_into(Re, phi)
        _so3_v_inv_into(phi, K, K2, Vi)
        _mv3(Vi, te, out[e, :3])
        out[e, 3] = phi[0]
        out[e, 4] = phi[1]
        out[e, 5] = phi[2]
    return out


@njit(cache=True)
def edge_terms(Rf, tf, Rt, tt, Rm, tm):
    E = Rf.shape[0]
    r = np.empty((E, 6))
    Jf = np.empty((E, 6, 6))
    Jt = np.empty((E, 6, 6))
    Rp = np.empty((3, 3))
    Re = np.empty((3, 3))
    K = np.empty((3, 3))
    K2 = np.empty((3, 3))
    Vi = np.empty((3, 3))
    Q = np.empty((3, 3))
    QJ = np.empty((3, 3))
    JQJ = np.empty((3, 3))
    Ra = np.empty((3, 3))
    SR = np.empty((3, 3))
    St = np.empty((3, 3))
    P = np.empty((3, 3))
    H = np.empty((3, 3))
    W1 = np.empty((3, 3))
    W2 = np.empty((3, 3))
    W3 = np.empty((3, 3))
    W4 = np.empty((3, 3))
    Ad = np.zeros((6, 6))
    Jri = np.zeros((6, 6))
    tp = np.empty(3)
    te = np.empty(3)
    d = np.empty(3)
    ta = np.empty(3)
    phi = np.empty(3)
    nrho = np.empty(3)
    nphi = np.empty(3)
    for e in range(E):
        _mm3(Rf[e], Rm[e], Rp)
        _mv3(Rf[e], tm[e], tp)
        tp[0] += tf[e, 0]
        tp[1] += tf[e, 1]
        tp[2] += tf[e, 2]
        _mm3_tn(Rp, Rt[e], Re)
        d[0] = tt[e, 0] - tp[0]
        d[1] = tt[e, 1] - tp[1]
        d[2] = tt[e, 2] - tp[2]
        _mv3_tn(Rp, d, te)
        _so3_log_into(Re, phi)
        _so3_v_inv_into(phi, K, K2, Vi)
        _mv3(Vi, te, r[e, :3])
        r[e, 3] = phi[0]
        r[e, 4] = phi[1]
        r[e, 5] = phi[2]

        # Jri = inverse right Jacobian at r = inverse left Jacobian at -r
        for i in range(3):
            nrho[i] = -r[e, i]
            nphi[i] = -r[e, 3 + i]
        _so3_v_inv_into(nphi, K, K2, Vi)
        _q_block_into(nrho, nphi, P, H, W1, W2, W3, W4, Q)
        _mm3(Q, Vi, QJ)
        _mm3(Vi, QJ, JQJ)
        for i in range(3):
            for j in range(3):
                Jri[i, j] = Vi[i, j]
                Jri[3 + i, 3 + j] = Vi[i, j]
                Jri[i, 3 + j] = -JQJ[i, j]
        Jt[e] = Jri

        # J_from = -Jri @ Ad(inv(x_to) * x_from)
        _mm3_tn(Rt[e], Rf[e], Ra)
        d[0] = tf[e, 0] - tt[e, 0]
        d[1] = tf[e, 1] - tt[e, 1]
        d[2] = tf[e, 2] - tt[e, 2]
        _mv3_tn(Rt[e], d, ta)
        _skew_into(ta, St)
        _mm3(St, Ra, SR)
        for i in range(3):
            for j in range(3):
                Ad[i, j] = Ra[i, j]
                Ad[3 + i, 3 + j] = Ra[i, j]
                Ad[i, 3 + j] = SR[i, j]
        _mm6_into(Jri, Ad, Jf[e])
        for i in range(6):
            for j in range(6):
                Jf[e, i, j] = -Jf[e, i, j]
    return r, Jf, Jt


@njit(cache=True)
def se3_exp_batch(xi):
    N = xi.shape[0]
    R = np.empty((N, 3, 3))
    t = np.empty((N, 3))
    K = np.empty((3, 3))
    K2 = np.empty((3, 3))
    V = np.empty((3, 3))
    for n in range(N):
        _so3_exp_into(xi[n, 3:], K, K2, R[n])
        _so3_v_into(xi[n, 3:], K, K2, V)
        _mv3(V, xi[n, :3], t[n])
    return R, t


@njit(cache=True)
def se3_log_batch(R, t):
    N = R.shape[0]
    out = np.empty((N, 6))
    K = np.empty((3, 3))
    K2 = np.empty((3, 3))
    Vi = np.empty((3, 3))
    phi = np.empty(3)
    for n in range(N):
        _so3_log_into(R[n], phi)
        _so3_v_inv_into(phi, K, K2, Vi)
        _mv3(Vi, t[n], out[n, :3])
        out[n, 3] = phi[0]
        out[n, 4] = phi[1]
        out[n, 5] = phi[2]
    return out


def warmup() -> None:
    """Trigger jit compilation of every kernel on tiny inputs."""
    R = np.eye(3)[None].repeat(2, axis=0)
    t = np.zeros((2, 3))
    xi = np.full((2, 6), 0.01)
    Rx, tx = se3_exp_batch(xi)
    edge_terms(Rx, tx, R, t, R, t)
    edge_residuals(Rx, tx, R, t, R, t)
    se3_log_batch(Rx, tx)
