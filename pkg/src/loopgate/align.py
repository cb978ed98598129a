"""Closed-form similarity alignment of corresponded 3-D point sequences and
the RMSE change score between a trajectory and its re-optimized counterpart."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from loopgate.geometry import SimTransform, mat_to_quat

# singular values below this fraction of the largest are treated as rank loss
_RANK_RTOL = 1e-9


class DegenerateGeometryError(ValueError):
    """Alignment input with too few points or zero point-spread."""


@dataclass(frozen=True)
class PointCloudPair:
    """Index-corresponded reference and candidate point sets, both (n, 3)."""

    reference: np.ndarray
    candidate: np.ndarray

    def __post_init__(self):
        ref = np.asarray(self.reference, dtype=float)
        cand = np.asarray(self.candidate, dtype=float)
        if ref.ndim != 2 or ref.shape[1] != 3 or cand.shape != ref.shape:
            raise ValueError(f"expected matching (n,3) arrays, got {ref.shape} and {cand.shape}")
        if len(ref) < 3:
            raise DegenerateGeometryError(f"alignment needs at least 3 points, got {len(ref)}")
        object.__setattr__(self, "reference", ref.copy())
        object.__setattr__(self, "candidate", cand.copy())


@dataclass(frozen=True)
class AlignmentResult:
    transform: SimTransform
    rmse: float
    rank_deficient: bool = False


def _solve(pair: PointCloudPair, with_scale: bool) -> AlignmentResult:
    p = pair.reference
    q = pair.candidate
    n = len(p)
    mu_p = p.mean(axis=0)
    mu_q = q.mean(axis=0)
    dp = p - mu_p
    dq = q - mu_q
    var_q = float((dq**2).sum()) / n
    if var_q <= 0.0:
        raise DegenerateGeometryError("candidate points are all identical (zero variance)")

    # cross-covariance between reference and candidate (Umeyama's Sigma_pq)
    cov = dp.T @ dq / n
    U, D, Vt = np.linalg.svd(cov)
    S = np.eye(3)
    if np.linalg.det(U) * np.linalg.det(Vt) < 0.0:
        S[2, 2] = -1.0  # reflection guard keeps det(R) = +1
    R = U @ S @ Vt
    scale = float(np.trace(np.diag(D) @ S) / var_q) if with_scale else 1.0
    if scale <= 0.0:
        raise DegenerateGeometryError("non-positive optimal scale (anti-correlated point sets)")
    t = mu_p - scale * (R @ mu_q)
    transform = SimTransform(mat_to_quat(R), t, scale)

    mapped = scale * (q @ R.T) + t
    rmse = float(np.sqrt(((p - mapped) ** 2).sum() / n))
    rank_deficient = bool(D[-1] <= _RANK_RTOL * max(D[0], 1.0))
    return AlignmentResult(transform, rmse, rank_deficient)


def umeyama(pair: PointCloudPair, with_scale: bool = True) -> SimTransform:
    """Similarity transform minimizing sum ||p_i - (a R q_i + t)||^2 over the
    candidate points q; proper rotation, positive scale. `with_scale=False`
    pins the scale to 1 (rigid alignment)."""
    return _solve(pair, with_scale).transform


def align(pair: PointCloudPair, with_scale: bool = True) -> AlignmentResult:
    """umeyama plus its achieved RMSE and a rank-deficiency diagnostic."""
    return _solve(pair, with_scale)


def change_score(pair: PointCloudPair) -> float:
    """Root-mean-square distance between the reference points and the
    optimally aligned candidate points: zero iff the clouds are
    similarity-equivalent."""
    return _solve(pair, True).rmse
