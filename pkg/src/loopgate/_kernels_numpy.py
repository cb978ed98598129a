"""Vectorized numpy kernels: batch SE(3) maps and per-edge residual/Jacobian
evaluation for the pose-graph solver. Mirrors _kernels_numba exactly; selected
via LOOPGATE_BACKEND=numpy (see backend.py)."""

from __future__ import annotations

import numpy as np

_SMALL = 1e-6


def _skew_batch(v: np.ndarray) -> np.ndarray:
    n = v.shape[0]
    K = np.zeros((n, 3, 3))
    K[:, 0, 1] = -v[:, 2]
    K[:, 0, 2] = v[:, 1]
    K[:, 1, 0] = v[:, 2]
    K[:, 1, 2] = -v[:, 0]
    K[:, 2, 0] = -v[:, 1]
    K[:, 2, 1] = v[:, 0]
    return K


def so3_exp_batch(phi: np.ndarray) -> np.ndarray:
    """Rotation vectors (N,3) to rotation matrices (N,3,3), Rodrigues form."""
    phi = np.ascontiguousarray(phi, dtype=np.float64)
    angle = np.linalg.norm(phi, axis=1)
    small = angle < _SMALL
    a = np.where(small, 1.0, angle)
    a2 = a * a
    c1 = np.where(small, 1.0 - angle * angle / 6.0, np.sin(a) / a)
    c2 = np.where(small, 0.5 - angle * angle / 24.0, (1.0 - np.cos(a)) / a2)
    K = _skew_batch(phi)
    K2 = K @ K
    return np.eye(3)[None] + c1[:, None, None] * K + c2[:, None, None] * K2


def mat_to_quat_batch(R: np.ndarray) -> np.ndarray:
    """Rotation matrices to unit quaternions (w,x,y,z), w >= 0."""
    n = R.shape[0]
    q = np.empty((n, 4))
    d0, d1, d2 = R[:, 0, 0], R[:, 1, 1], R[:, 2, 2]
    tr = d0 + d1 + d2

    # four Shepperd branches, computed for all rows then selected by mask
    s_w = np.sqrt(np.maximum(tr + 1.0, 0.0)) * 2.0
    s_x = np.sqrt(np.maximum(1.0 + d0 - d1 - d2, 0.0)) * 2.0
    s_y = np.sqrt(np.maximum(1.0 + d1 - d0 - d2, 0.0)) * 2.0
    s_z = np.sqrt(np.maximum(1.0 + d2 - d0 - d1, 0.0)) * 2.0

    m_w = tr > 0.0
    m_x = (~m_w) & (d0 >= d1) & (d0 >= d2)
    m_y = (~m_w) & (~m_x) & (d1 >= d2)
    m_z = ~(m_w | m_x | m_y)

    with np.errstate(divide="ignore", invalid="ignore"):
        q[:, 0] = np.select(
            [m_w, m_x, m_y, m_z],
            [0.25 * s_w, (R[:, 2, 1] - R[:, 1, 2]) / s_x, (R[:, 0, 2] - R[:, 2, 0]) / s_y, (R[:, 1, 0] - R[:, 0, 1]) / s_z],
        )
        q[:, 1] = np.select(
            [m_w, m_x, m_y, m_z],
            [(R[:, 2, 1] - R[:, 1, 2]) / s_w, 0.25 * s_x, (R[:, 0, 1] + R[:, 1, 0]) / s_y, (R[:, 0, 2] + R[:, 2, 0]) / s_z],
        )
        q[:, 2] = np.select(
            [m_w, m_x, m_y, m_z],
            [(R[:, 0, 2] - R[:, 2, 0]) / s_w, (R[:, 0, 1] + R[:, 1, 0]) / s_x, 0.25 * s_y, (R[:, 1, 2] + R[:, 2, 1]) / s_z],
        )
        q[:, 3] = np.select(
            [m_w, m_x, m_y, m_z],
            [(R[:, 1, 0] - R[:, 0, 1]) / s_w, (R[:, 0, 2] + R[:, 2, 0]) / s_x, (R[:, 1, 2] + R[:, 2, 1]) / s_y, 0.25 * s_z],
        )

    q /= np.linalg.norm(q, axis=1, keepdims=True)
    q[q[:, 0] < 0.0] *= -1.0
    return q


def so3_log_batch(R: np.ndarray) -> np.ndarray:
    """Rotation matrices to rotation vectors; stable through angle = pi."""
    q = mat_to_quat_batch(np.ascontiguousarray(R, dtype=np.float64))
    w = q[:, 0]
    v = q[:, 1:]
    s = np.linalg.norm(v, axis=1)
    angle = 2.0 * np.arctan2(s, w)
    small = s < _SMALL
    w_safe = np.where(np.abs(w) > 0.5, w, 1.0)  # small-s rows always have w ~ 1
    s_safe = np.where(small, 1.0, s)
    k = np.where(small, (2.0 / w_safe) * (1.0 - s * s / (3.0 * w_safe * w_safe)), angle / s_safe)
    return k[:, None] * v


def _v_coeffs(angle: np.ndarray):
    small = angle < _SMALL
    a = np.where(small, 1.0, angle)
    a2 = a * a
    c1 = np.where(small, 0.5 - angle * angle / 24.0, (1.0 - np.cos(a)) / a2)
    c2 = np.where(small, 1.0 / 6.0 - angle * angle / 120.0, (a - np.sin(a)) / (a2 * a))
    return c1, c2


def so3_v_batch(phi: np.ndarray) -> np.ndarray:
    angle = np.linalg.norm(phi, axis=1)
    c1, c2 = _v_coeffs(angle)
    K = _skew_batch(phi)
    return np.eye(3)[None] + c1[:, None, None] * K + c2[:, None, None] * (K @ K)


def so3_v_inv_batch(phi: np.ndarray) -> np.ndarray:
    angle = np.linalg.norm(phi, axis=1)
    small = angle < _SMALL
    a = np.where(small, 1.0, angle)
    a2 = a * a
    with np.errstate(invalid="ignore"):
        c = np.where(
            small,
            1.0 / 12.0 + angle * angle / 720.0,
            1.0 / a2 - (1.0 + np.cos(a)) / (2.0 * a * np.sin(a)),
        )
    K = _skew_batch(phi)
    return np.eye(3)[None] - 0.5 * K + c[:, None, None] * (K @ K)


def se3_exp_batch(xi: np.ndarray):
    """Tangents (N,6) [rho, phi] to rotation matrices (N,3,3) and translations (N,3)."""
    xi = np.ascontiguousarray(xi, dtype=np.float64)
    rho, phi = xi[:, :3], xi[:, 3:]
    R = so3_exp_batch(phi)
    t = np.einsum("nij,nj->ni", so3_v_batch(phi), rho)
    return R, t


def se3_log_batch(R: np.ndarray, t: np.ndarray) -> np.ndarray:
    phi = so3_log_batch(R)
    rho = np.einsum("nij,nj->ni", so3_v_inv_batch(phi), t)
    return np.concatenate([rho, phi], axis=1)


def _q_batch(rho: np.ndarray, phi: np.ndarray) -> np.ndarray:
    """Translation-rotation coupling block of the SE(3) left Jacobian."""
    angle = np.linalg.norm(phi, axis=1)
    small = angle < 1e-3
    a = np.where(small, 1.0, angle)
    a2, a3 = a * a, a * a * a
    a4, a5 = a3 * a, a3 * a2
    m2 = np.where(small, 1.0 / 6.0 - angle * angle / 120.0, (a - np.sin(a)) / a3)
    m3 = np.where(small, 1.0 / 24.0 - angle * angle / 720.0, (a2 / 2.0 + np.cos(a) - 1.0) / a4)
    m4 = np.where(small, -1.0 / 120.0 + angle * angle / 5040.0, (a - np.sin(a) - a3 / 6.0) / a5)
    P = _skew_batch(phi)
    H = _skew_batch(rho)
    PH = P @ H
    HP = H @ P
    PHP = PH @ P
    PP = P @ P
    T1 = PH + HP + PHP
    T2 = PP @ H + HP @ P - 3.0 * PHP
    T3 = PHP @ P + PP @ HP
    return (
        0.5 * H
        + m2[:, None, None] * T1
        + m3[:, None, None] * T2
        + (0.5 * (m3 + 3.0 * m4))[:, None, None] * T3
    )


def se3_jl_inv_batch(xi: np.ndarray) -> np.ndarray:
    """Inverse left Jacobian of SE(3) at tangents (N,6)."""
    rho, phi = xi[:, :3], xi[:, 3:]
    Ji = so3_v_inv_batch(phi)
    Q = _q_batch(rho, phi)
    n = xi.shape[0]
    out = np.zeros((n, 6, 6))
    out[:, :3, :3] = Ji
    out[:, 3:, 3:] = Ji
    out[:, :3, 3:] = -(Ji @ Q @ Ji)
    return out


def _adjoint_batch(R: np.ndarray, t: np.ndarray) -> np.ndarray:
    n = R.shape[0]
    out = np.zeros((n, 6, 6))
    out[:, :3, :3] = R
    out[:, 3:, 3:] = R
    out[:, :3, 3:] = _skew_batch(t) @ R
    return out


def edge_residuals(Rf, tf, Rt, tt, Rm, tm) -> np.ndarray:
    """Per-edge residuals log(inv(x_from * u) * x_to), shape (E, 6)."""
    Rp = Rf @ Rm
    tp = np.einsum("nij,nj->ni", Rf, tm) + tf
    Re = np.einsum("nji,njk->nik", Rp, Rt)  # Rp^T @ Rt
    te = np.einsum("nji,nj->ni", Rp, tt - tp)
    return se3_log_batch(Re, te)


def edge_terms(Rf, tf, Rt, tt, Rm, tm):
    """Residuals plus analytic Jacobians wrt right-perturbations of both
    endpoint poses. Returns (r (E,6), J_from (E,6,6), J_to (E,6,6))."""
    r = edge_residuals(Rf, tf, Rt, tt, Rm, tm)
    Jri = se3_jl_inv_batch(-r)  # right Jacobian inverse at r
    Ra = np.einsum("nji,njk->nik", Rt, Rf)
    ta = np.einsum("nji,nj->ni", Rt, tf - tt)
    Jf = -(Jri @ _adjoint_batch(Ra, ta))
    return r, Jf, Jri
