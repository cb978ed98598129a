"""SE(3) and SIM(3) primitives: unit-quaternion poses, similarity transforms,
and the exp/log maps between poses and their 6-dof tangent vectors.

Conventions: quaternions are (w, x, y, z) and kept unit-norm with w >= 0;
tangent vectors are ordered [rho (translation), phi (rotation)]; composing
a * b applies b first in a's frame (p -> R_a (R_b p + t_b) + t_a).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# Below this rotation angle the closed-form Rodrigues coefficients are
# replaced by their Taylor expansions.
SMALL_ANGLE = 1e-6


class BranchAmbiguityError(ValueError):
    """Raised by log() at a rotation angle of pi, where the principal branch
    is ambiguous (the rotation axis sign is undetermined)."""


def _unit_quat(q) -> np.ndarray:
    q = np.asarray(q, dtype=float).reshape(4).copy()
    n = float(np.linalg.norm(q))
    if n == 0.0 or not np.isfinite(n):
        raise ValueError("quaternion must be nonzero and finite")
    q /= n
    if q[0] < 0.0:  # canonical sign keeps log on the principal branch
        q = -q
    return q


@dataclass(frozen=True)
class Pose:
    """Rigid transform: unit quaternion (w, x, y, z) plus translation in meters."""

    q: np.ndarray
    t: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "q", _unit_quat(self.q))
        object.__setattr__(self, "t", np.asarray(self.t, dtype=float).reshape(3).copy())

    @staticmethod
    def identity() -> "Pose":
        return Pose(np.array([1.0, 0.0, 0.0, 0.0]), np.zeros(3))

    @staticmethod
    def from_matrix(T: np.ndarray) -> "Pose":
        T = np.asarray(T, dtype=float)
        return Pose(mat_to_quat(T[:3, :3]), T[:3, 3])

    def rotation_matrix(self) -> np.ndarray:
        return quat_to_mat(self.q)

    def matrix(self) -> np.ndarray:
        T = np.eye(4)
        T[:3, :3] = quat_to_mat(self.q)
        T[:3, 3] = self.t
        return T

    def rotation_angle(self) -> float:
        """Rotation angle in [0, pi] radians."""
        return 2.0 * float(np.arctan2(np.linalg.norm(self.q[1:]), self.q[0]))

    def apply(self, p) -> np.ndarray:
        return quat_rotate(self.q, np.asarray(p, dtype=float)) + self.t


@dataclass(frozen=True)
class Tangent6:
    """se(3) tangent vector: rho is the translational part (meters), phi the
    rotational part (radians)."""

    rho: np.ndarray
    phi: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "rho", np.asarray(self.rho, dtype=float).reshape(3).copy())
        object.__setattr__(self, "phi", np.asarray(self.phi, dtype=float).reshape(3).copy())

    @staticmethod
    def zero() -> "Tangent6":
        return Tangent6(np.zeros(3), np.zeros(3))

    @staticmethod
    def from_array(v) -> "Tangent6":
        v = np.asarray(v, dtype=float).reshape(6)
        return Tangent6(v[:3], v[3:])

    def as_array(self) -> np.ndarray:
        return np.concatenate([self.rho, self.phi])

    def norm(self) -> float:
        return float(np.linalg.norm(self.as_array()))


@dataclass(frozen=True)
class SimTransform:
    """Similarity transform p -> scale * R p + t."""

    q: np.ndarray
    t: np.ndarray
    scale: float

    def __post_init__(self):
        object.__setattr__(self, "q", _unit_quat(self.q))
        object.__setattr__(self, "t", np.asarray(self.t, dtype=float).reshape(3).copy())
        s = float(self.scale)
        if not (s > 0.0 and np.isfinite(s)):
            raise ValueError(f"scale must be positive and finite, got {self.scale}")
        object.__setattr__(self, "scale", s)

    @staticmethod
    def identity() -> "SimTransform":
        return SimTransform(np.array([1.0, 0.0, 0.0, 0.0]), np.zeros(3), 1.0)

    def rotation_matrix(self) -> np.ndarray:
        return quat_to_mat(self.q)


# ---------------------------------------------------------------------------
# quaternion helpers


def quat_mul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    aw, ax, ay, az = a
    bw, bx, by, bz = b
    return np.array(
        [
            aw * bw - ax * bx - ay * by - az * bz,
            aw * bx + ax * bw + ay * bz - az * by,
            aw * by - ax * bz + ay * bw + az * bx,
            aw * bz + ax * by - ay * bx + az * bw,
        ]
    )


def quat_conj(q: np.ndarray) -> np.ndarray:
    return np.array([q[0], -q[1], -q[2], -q[3]])


def quat_rotate(q: np.ndarray, p: np.ndarray) -> np.ndarray:
    # q p q* via two unrolled cross products; cheaper than building the matrix
    w, x, y, z = q
    px, py, pz = p
    ux = y * pz - z * py
    uy = z * px - x * pz
    uz = x * py - y * px
    vx = y * uz - z * uy
    vy = z * ux - x * uz
    vz = x * uy - y * ux
    return np.array([px + 2.0 * (w * ux + vx), py + 2.0 * (w * uy + vy), pz + 2.0 * (w * uz + vz)])


def quat_to_mat(q: np.ndarray) -> np.ndarray:
    w, x, y, z = q
    return np.array(
        [
            [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
            [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
            [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
        ]
    )


def mat_to_quat(R: np.ndarray) -> np.ndarray:
    """Rotation matrix to quaternion, branching on the largest diagonal term."""
    R = np.asarray(R, dtype=float)
    tr = R[0, 0] + R[1, 1] + R[2, 2]
    if tr > 0.0:
        s = np.sqrt(tr + 1.0) * 2.0
        q = np.array(
            [0.25 * s, (R[2, 1] - R[1, 2]) / s, (R[0, 2] - R[2, 0]) / s, (R[1, 0] - R[0, 1]) / s]
        )
    elif R[0, 0] >= R[1, 1] and R[0, 0] >= R[2, 2]:
        s = np.sqrt(1.0 + R[0, 0] - R[1, 1] - R[2, 2]) * 2.0
        q = np.array(
            [(R[2, 1] - R[1, 2]) / s, 0.25 * s, (R[0, 1] + R[1, 0]) / s, (R[0, 2] + R[2, 0]) / s]
        )
    elif R[1, 1] >= R[2, 2]:
        s = np.sqrt(1.0 + R[1, 1] - R[0, 0] - R[2, 2]) * 2.0
        q = np.array(
            [(R[0, 2] - R[2, 0]) / s, (R[0, 1] + R[1, 0]) / s, 0.25 * s, (R[1, 2] + R[2, 1]) / s]
        )
    else:
        s = np.sqrt(1.0 + R[2, 2] - R[0, 0] - R[1, 1]) * 2.0
        q = np.array(
            [(R[1, 0] - R[0, 1]) / s, (R[0, 2] + R[2, 0]) / s, (R[1, 2] + R[2, 1]) / s, 0.25 * s]
        )
    return _unit_quat(q)


def quat_exp(phi: np.ndarray) -> np.ndarray:
    """so(3) rotation vector to unit quaternion."""
    phi = np.asarray(phi, dtype=float)
    angle = float(np.linalg.norm(phi))
    half = 0.5 * angle
    if angle < SMALL_ANGLE:
        k = 0.5 - angle * angle / 48.0  # sin(a/2)/a
    else:
        k = np.sin(half) / angle
    return _unit_quat(np.array([np.cos(half), k * phi[0], k * phi[1], k * phi[2]]))


def quat_log(q: np.ndarray) -> np.ndarray:
    """Unit quaternion to rotation vector on the principal branch (angle < pi)."""
    q = _unit_quat(q)
    w = q[0]
    v = q[1:]
    s = float(np.linalg.norm(v))
    angle = 2.0 * float(np.arctan2(s, w))
    if angle >= np.pi - 1e-9:
        raise BranchAmbiguityError(f"rotation angle {angle} is at the pi branch cut")
    if s < SMALL_ANGLE:
        # angle/sin(angle/2) ~ 2/w * (1 - s^2 / (3 w^2)) for small s
        k = (2.0 / w) * (1.0 - s * s / (3.0 * w * w))
    else:
        k = angle / s
    return k * v


# ---------------------------------------------------------------------------
# SE(3) group operations


def compose(a: Pose, b: Pose) -> Pose:
    """a then-first-applies b: returns the pose mapping p -> a(b(p))."""
    return Pose(quat_mul(a.q, b.q), quat_rotate(a.q, b.t) + a.t)


def inverse(p: Pose) -> Pose:
    qc = quat_conj(p.q)
    return Pose(qc, -quat_rotate(qc, p.t))


def relative(a: Pose, b: Pose) -> Pose:
    """Pose of b expressed in a's frame: inverse(a) * b."""
    return compose(inverse(a), b)


def _skew(v: np.ndarray) -> np.ndarray:
    return np.array([[0.0, -v[2], v[1]], [v[2], 0.0, -v[0]], [-v[1], v[0], 0.0]])


def so3_left_jacobian(phi: np.ndarray) -> np.ndarray:
    """V matrix coupling rotation and translation in the se(3) exp map."""
    angle = float(np.linalg.norm(phi))
    K = _skew(phi)
    if angle < SMALL_ANGLE:
        c1 = 0.5 - angle * angle / 24.0
        c2 = 1.0 / 6.0 - angle * angle / 120.0
    else:
        a2 = angle * angle
        c1 = (1.0 - np.cos(angle)) / a2
        c2 = (angle - np.sin(angle)) / (a2 * angle)
    return np.eye(3) + c1 * K + c2 * (K @ K)


def so3_left_jacobian_inv(phi: np.ndarray) -> np.ndarray:
    angle = float(np.linalg.norm(phi))
    K = _skew(phi)
    if angle < SMALL_ANGLE:
        c = 1.0 / 12.0 + angle * angle / 720.0
    else:
        a2 = angle * angle
        c = 1.0 / a2 - (1.0 + np.cos(angle)) / (2.0 * angle * np.sin(angle))
    return np.eye(3) - 0.5 * K + c * (K @ K)


def exp(v: Tangent6) -> Pose:
    """se(3) exponential: tangent [rho, phi] to a Pose."""
    return Pose(quat_exp(v.phi), so3_left_jacobian(v.phi) @ v.rho)


def log(p: Pose) -> Tangent6:
    """se(3) logarithm on the principal branch (rotation angle < pi)."""
    phi = quat_log(p.q)
    rho = so3_left_jacobian_inv(phi) @ p.t
    return Tangent6(rho, phi)


# ---------------------------------------------------------------------------
# SIM(3) operations


def apply_sim(s: SimTransform, p) -> np.ndarray:
    return s.scale * quat_rotate(s.q, np.asarray(p, dtype=float)) + s.t


def compose_sim(a: SimTransform, b: SimTransform) -> SimTransform:
    return SimTransform(
        quat_mul(a.q, b.q),
        a.scale * quat_rotate(a.q, b.t) + a.t,
        a.scale * b.scale,
    )


def inverse_sim(s: SimTransform) -> SimTransform:
    qc = quat_conj(s.q)
    return SimTransform(qc, -quat_rotate(qc, s.t) / s.scale, 1.0 / s.scale)
