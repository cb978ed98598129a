"""Pose-graph optimization: damped Gauss-Newton (Levenberg-Marquardt) over
SE(3) node poses with relative-pose edges.

The per-edge residual is log(inv(x_from * u) * x_to), the manifold realization
of the measurement discrepancy; stacking its weighted squares over odometry
edges plus the (optionally gated) loop edge gives the nonlinear least-squares
objective. States update by right-multiplication with exp of the solved
increment; node `fixed_node` is excluded from the state to pin the gauge.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Optional, Tuple

import numpy as np
import scipy.linalg
import scipy.sparse as sp
from scipy.sparse.csgraph import reverse_cuthill_mckee
from scipy.sparse.linalg import splu

from loopgate import backend, geometry
from loopgate.geometry import Pose, Tangent6
from loopgate.graph import Edge, LoopCandidate, PoseGraph, Trajectory, TrajectoryPoint

_MAX_DAMPING = 1e32
_MIN_DAMPING = 1e-12


class TerminationReason(Enum):
    COST_TOL = "cost_tol"
    GRADIENT_TOL = "gradient_tol"
    MAX_ITER = "max_iter"
    NUMERICAL_FAILURE = "numerical_failure"


@dataclass
class SolverConfig:
    max_iterations: int = 100
    relative_decrease_tol: float = 1e-6
    gradient_tol: float = 1e-8
    initial_damping: float = 1e-6
    damping_up: float = 10.0
    damping_down: float = 10.0

    def __post_init__(self):
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        for name in ("relative_decrease_tol", "gradient_tol", "initial_damping", "damping_up", "damping_down"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")


@dataclass
class SolveReport:
    converged: bool
    iterations: int
    initial_cost: float
    final_cost: float
    termination_reason: TerminationReason


def residual(edge: Edge, x_from: Pose, x_to: Pose) -> Tangent6:
    """log(inv(x_from * u) * x_to); zero iff the measurement is exactly consistent."""
    err = geometry.compose(geometry.inverse(geometry.compose(x_from, edge.measurement)), x_to)
    return geometry.log(err)


def linearize_edge(edge: Edge, x_from: Pose, x_to: Pose):
    """Residual and its analytic Jacobians wrt right-perturbations of the two
    endpoint poses: returns (r (6,), J_from (6,6), J_to (6,6))."""
    k = backend.kernels()
    Rf = x_from.rotation_matrix()[None]
    Rt = x_to.rotation_matrix()[None]
    Rm = edge.measurement.rotation_matrix()[None]
    r, Jf, Jt = k.edge_terms(
        np.ascontiguousarray(Rf),
        x_from.t[None].copy(),
        np.ascontiguousarray(Rt),
        x_to.t[None].copy(),
        np.ascontiguousarray(Rm),
        edge.measurement.t[None].copy(),
    )
    return r[0], Jf[0], Jt[0]


def cost(graph: PoseGraph, extra_edge: Optional[Edge] = None) -> float:
    """Sum of squared Mahalanobis residuals over all edges at the node poses."""
    total = 0.0
    edges = list(graph.edges) + ([extra_edge] if extra_edge is not None else [])
    for e in edges:
        r = residual(e, graph.nodes[e.from_id], graph.nodes[e.to_id]).as_array()
        total += float(r @ e.information @ r)
    return total


class _Problem:
    """Array-form view of one graph + optional loop candidate."""

    def __init__(self, graph: PoseGraph, loop: Optional[LoopCandidate]):
        n = len(graph.nodes)
        graph.odometry_chain()  # raises unless the odometry chain is connected
        edges = list(graph.edges)
        if loop is not None:
            if not (0 <= loop.match_id < n and 0 <= loop.query_id < n):
                raise ValueError(
                    f"loop candidate ({loop.query_id},{loop.match_id}) references missing node"
                )
            edges.append(loop.as_edge())
        self.n = n
        self.fixed = graph.fixed_node
        self.from_ids = np.array([e.from_id for e in edges])
        self.to_ids = np.array([e.to_id for e in edges])
        self.W = np.ascontiguousarray([e.information for e in edges])
        self.Rm = np.ascontiguousarray([e.measurement.rotation_matrix() for e in edges])
        self.tm = np.ascontiguousarray([e.measurement.t for e in edges])
        self.R = np.ascontiguousarray([p.rotation_matrix() for p in graph.nodes])
        self.t = np.ascontiguousarray([p.t for p in graph.nodes])

        # free-node block index (fixed node -> -1)
        self.block = np.full(n, -1)
        free = [k for k in range(n) if k != self.fixed]
        self.block[free] = np.arange(n - 1)
        self.m = n - 1

        # sparse-structure slots: one (rows, cols) pair per contributing 6x6 block
        bf = self.block[self.from_ids]
        bt = self.block[self.to_ids]
        self.mask_f = bf >= 0
        self.mask_t = bt >= 0
        self.mask_ft = self.mask_f & self.mask_t
        ii, jj = np.meshgrid(np.arange(6), np.arange(6), indexing="ij")
        rows, cols = [], []
        for blk_r, blk_c in (
            (bf[self.mask_f], bf[self.mask_f]),
            (bt[self.mask_t], bt[self.mask_t]),
            (bf[self.mask_ft], bt[self.mask_ft]),
            (bt[self.mask_ft], bf[self.mask_ft]),
        ):
            rows.append((6 * blk_r[:, None, None] + ii[None]).ravel())
            cols.append((6 * blk_c[:, None, None] + jj[None]).ravel())
        self.rows = np.concatenate(rows)
        self.cols = np.concatenate(cols)
        self.bf = bf
        self.bt = bt
        self._plan_linear_solve()

    _BAND_LIMIT = 40  # block bandwidth beyond which sparse LU beats banded Cholesky

    def _plan_linear_solve(self):
        """Order the free blocks with reverse Cuthill-McKee; if the reordered
        normal matrix is narrow-banded, precompute scatter indices into LAPACK
        upper-banded storage, else fall back to sparse LU."""
        m = self.m
        pairs = {(b, b) for b in range(m)}
        for a, b in zip(self.bf, self.bt):
            if a >= 0 and b >= 0:
                pairs.add((a, b))
                pairs.add((b, a))
        pr = np.array([p[0] for p in pairs])
        pc = np.array([p[1] for p in pairs])
        adj = sp.coo_matrix((np.ones(len(pr)), (pr, pc)), shape=(m, m)).tocsr()
        perm = np.asarray(reverse_cuthill_mckee(adj, symmetric_mode=True))
        pinv = np.empty(m, dtype=np.int64)
        pinv[perm] = np.arange(m)
        bw = 0
        for a, b in pairs:
            bw = max(bw, abs(int(pinv[a]) - int(pinv[b])))
        self.banded = bw <= self._BAND_LIMIT
        if not self.banded:
            return
        self.perm = perm
        dim = 6 * m
        u = 6 * bw + 5
        self.band_u = u
        new_rows = 6 * pinv[self.rows // 6] + self.rows % 6
        new_cols = 6 * pinv[self.cols // 6] + self.cols % 6
        keep = new_rows <= new_cols
        self.band_keep = keep
        self.band_flat = (u + new_rows[keep] - new_cols[keep]) * dim + new_cols[keep]
        # dof order of the permuted system, for b and delta reshuffling
        self.dof_perm = (6 * perm[:, None] + np.arange(6)[None]).ravel()

    def gather(self, R, t):
        return (
            np.ascontiguousarray(R[self.from_ids]),
            np.ascontiguousarray(t[self.from_ids]),
            np.ascontiguousarray(R[self.to_ids]),
            np.ascontiguousarray(t[self.to_ids]),
        )

    def residuals(self, R, t) -> np.ndarray:
        k = backend.kernels()
        Rf, tf, Rt, tt = self.gather(R, t)
        return k.edge_residuals(Rf, tf, Rt, tt, self.Rm, self.tm)

    def cost_of(self, r: np.ndarray) -> float:
        return float(np.einsum("ei,eij,ej->", r, self.W, r))

    def linearize(self, R, t):
        """Residuals, assembled normal matrix (banded or sparse CSC), and the
        gradient-half b = J^T W r."""
        k = backend.kernels()
        Rf, tf, Rt, tt = self.gather(R, t)
        r, Jf, Jt = k.edge_terms(Rf, tf, Rt, tt, self.Rm, self.tm)
        JfW = np.einsum("eji,ejk->eik", Jf, self.W)
        JtW = np.einsum("eji,ejk->eik", Jt, self.W)
        Hff = JfW @ Jf
        Htt = JtW @ Jt
        Hft = JfW @ Jt
        data = np.concatenate(
            [
                Hff[self.mask_f].ravel(),
                Htt[self.mask_t].ravel(),
                Hft[self.mask_ft].ravel(),
                Hft[self.mask_ft].transpose(0, 2, 1).ravel(),
            ]
        )
        dim = 6 * self.m
        if self.banded:
            ab = np.zeros((self.band_u + 1) * dim)
            np.add.at(ab, self.band_flat, data[self.band_keep])
            H = ab.reshape(self.band_u + 1, dim)
        else:
            H = sp.coo_matrix((data, (self.rows, self.cols)), shape=(dim, dim)).tocsc()
        b = np.zeros((self.m, 6))
        bf_terms = np.einsum("eij,ej->ei", JfW, r)
        bt_terms = np.einsum("eij,ej->ei", JtW, r)
        np.add.at(b, self.bf[self.mask_f], bf_terms[self.mask_f])
        np.add.at(b, self.bt[self.mask_t], bt_terms[self.mask_t])
        return r, H, b.ravel()

    def solve_step(self, H, b, lam: float):
        """Solve (H + lam*diag(H)) delta = -b; None when the factorization fails."""
        if self.banded:
            d = np.maximum(H[self.band_u], 1e-12)
            ab = H.copy()
            ab[self.band_u] += lam * d
            try:
                x = scipy.linalg.solveh_banded(ab, -b[self.dof_perm], lower=False)
            except np.linalg.LinAlgError:
                return None
            delta = np.empty_like(x)
            delta[self.dof_perm] = x
            return delta
        d = np.maximum(H.diagonal(), 1e-12)
        M = (H + lam * sp.diags(d)).tocsc()
        try:
            return splu(M).solve(-b)
        except RuntimeError:
            return None

    def retract(self, R, t, delta: np.ndarray):
        k = backend.kernels()
        d = delta.reshape(self.m, 6)
        Rd, td = k.se3_exp_batch(np.ascontiguousarray(d))
        free = self.block >= 0
        Rn = R.copy()
        tn = t.copy()
        Rn[free] = R[free] @ Rd
        tn[free] = np.einsum("nij,nj->ni", R[free], td) + t[free]
        return Rn, tn


def optimize(
    graph: PoseGraph, loop: Optional[LoopCandidate] = None, config: Optional[SolverConfig] = None
) -> Tuple[Trajectory, SolveReport]:
    """Minimize the weighted edge residuals; the input graph is not mutated.

    Returns the optimized trajectory and a report whose `converged` flag is
    the gate the verifier relies on: relative cost decrease or gradient below
    tolerance counts as converged, exhausting max_iterations does not.
    """
    cfg = config or SolverConfig()
    prob = _Problem(graph, loop)
    R, t = prob.R, prob.t

    r = prob.residuals(R, t)
    initial_cost = prob.cost_of(r)
    stamps = graph.node_timestamps()

    def result(Rc, tc, any_accepted, converged, iters, final_cost, reason):
        if any_accepted:
            poses = [Pose(geometry.mat_to_quat(Rc[k]), tc[k]) for k in range(prob.n)]
        else:
            poses = list(graph.nodes)
        traj = Trajectory([TrajectoryPoint(ts, p) for ts, p in zip(stamps, poses)])
        return traj, SolveReport(converged, iters, initial_cost, final_cost, reason)

    if not math.isfinite(initial_cost):
        return result(R, t, False, False, 0, initial_cost, TerminationReason.NUMERICAL_FAILURE)

    _, H, b = prob.linearize(R, t)
    if float(np.max(np.abs(2.0 * b), initial=0.0)) < cfg.gradient_tol:
        return result(R, t, False, True, 0, initial_cost, TerminationReason.GRADIENT_TOL)

    lam = cfg.initial_damping
    prev_cost = initial_cost
    any_accepted = False
    iterations = 0
    while iterations < cfg.max_iterations:
        iterations += 1
        delta = prob.solve_step(H, b, lam)
        if delta is None or not np.all(np.isfinite(delta)):
            lam *= cfg.damping_up
            if lam > _MAX_DAMPING:
                return result(
                    R, t, any_accepted, False, iterations, prev_cost, TerminationReason.NUMERICAL_FAILURE
                )
            continue

        Rn, tn = prob.retract(R, t, delta)
        new_cost = prob.cost_of(prob.residuals(Rn, tn))
        if math.isfinite(new_cost) and new_cost <= prev_cost:
            R, t = Rn, tn
            any_accepted = True
            rel = (prev_cost - new_cost) / max(prev_cost, 1e-300)
            prev_cost = new_cost
            lam = max(lam / cfg.damping_down, _MIN_DAMPING)
            _, H, b = prob.linearize(R, t)
            if rel < cfg.relative_decrease_tol:
                return result(R, t, any_accepted, True, iterations, prev_cost, TerminationReason.COST_TOL)
            if float(np.max(np.abs(2.0 * b), initial=0.0)) < cfg.gradient_tol:
                return result(
                    R, t, any_accepted, True, iterations, prev_cost, TerminationReason.GRADIENT_TOL
                )
        else:
            lam *= cfg.damping_up
            if lam > _MAX_DAMPING:
                return result(
                    R, t, any_accepted, False, iterations, prev_cost, TerminationReason.NUMERICAL_FAILURE
                )

    return result(R, t, any_accepted, False, iterations, prev_cost, TerminationReason.MAX_ITER)
