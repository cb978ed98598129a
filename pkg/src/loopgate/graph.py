"""Pose-graph data model: timestamped trajectories, odometry/loop edges,
and loop candidates submitted for verification."""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Optional, Sequence

import numpy as np

from loopgate import geometry
from loopgate.geometry import Pose

INFO_SYMMETRY_TOL = 1e-9


class EdgeKind(Enum):
    ODOMETRY = "odometry"
    LOOP = "loop"


def _check_information(information) -> np.ndarray:
    info = np.asarray(information, dtype=float)
    if info.shape != (6, 6):
        raise ValueError(f"information matrix must be 6x6, got {info.shape}")
    if not np.all(np.isfinite(info)):
        raise ValueError("information matrix has non-finite entries")
    if np.max(np.abs(info - info.T)) > INFO_SYMMETRY_TOL * max(1.0, np.max(np.abs(info))):
        raise ValueError("information matrix is not symmetric")
    try:
        np.linalg.cholesky(info)
    except np.linalg.LinAlgError:
        raise ValueError("information matrix is not positive-definite") from None
    return 0.5 * (info + info.T)


@dataclass(frozen=True)
class TrajectoryPoint:
    timestamp: float
    pose: Pose


@dataclass(frozen=True)
class Trajectory:
    """Time-ordered keyframe poses; timestamps strictly increasing."""

    points: tuple

    def __init__(self, points: Sequence[TrajectoryPoint]):
        pts = tuple(points)
        if not pts:
            raise ValueError("trajectory must be nonempty")
        for a, b in zip(pts, pts[1:]):
            if not b.timestamp > a.timestamp:
                raise ValueError(
                    f"timestamps must be strictly increasing ({a.timestamp} -> {b.timestamp})"
                )
        object.__setattr__(self, "points", pts)

    def __len__(self) -> int:
        return len(self.points)

    def __getitem__(self, i) -> TrajectoryPoint:
        return self.points[i]

    def timestamps(self) -> np.ndarray:
        return np.array([p.timestamp for p in self.points])

    def poses(self) -> list:
        return [p.pose for p in self.points]

    def translations(self) -> np.ndarray:
        """The (n, 3) array of keyframe positions, the trajectory's translational shadow."""
        return np.array([p.pose.t for p in self.points])

    def scaled(self, k: float) -> "Trajectory":
        """Copy with every translation multiplied by k (rotations untouched)."""
        return Trajectory(
            [TrajectoryPoint(p.timestamp, Pose(p.pose.q, k * p.pose.t)) for p in self.points]
        )


@dataclass(frozen=True)
class Edge:
    """Relative-pose constraint between two nodes, weighted by an information matrix."""

    from_id: int
    to_id: int
    measurement: Pose
    information: np.ndarray
    kind: EdgeKind

    def __post_init__(self):
        if self.from_id == self.to_id:
            raise ValueError(f"edge endpoints must differ, got {self.from_id}")
        object.__setattr__(self, "information", _check_information(self.information))


@dataclass
class LoopCandidate:
    """Backward-in-time loop constraint: measurement is the pose of the match
    keyframe expressed in the query keyframe's frame. Candidates arriving with
    query_id <= match_id are normalized by swapping and inverting."""

    query_id: int
    match_id: int
    measurement: Pose
    information: np.ndarray = field(default_factory=lambda: np.eye(6))
    label: Optional[bool] = None

    def __post_init__(self):
        if self.query_id < 0 or self.match_id < 0:
            raise ValueError("candidate indices must be nonnegative")
        if self.query_id == self.match_id:
            raise ValueError("candidate endpoints must differ")
        if self.query_id < self.match_id:
            self.query_id, self.match_id = self.match_id, self.query_id
            self.measurement = geometry.inverse(self.measurement)
        self.information = _check_information(self.information)

    def as_edge(self) -> Edge:
        return Edge(self.query_id, self.match_id, self.measurement, self.information, EdgeKind.LOOP)


@dataclass
class PoseGraph:
    """Nodes plus odometry (and optionally loop) edges; node `fixed_node`
    anchors the gauge. Timestamps ride along so solver output can be
    re-expressed as a timestamped trajectory."""

    nodes: list
    edges: list
    fixed_node: int = 0
    timestamps: Optional[list] = None

    def __post_init__(self):
        n = len(self.nodes)
        if not 0 <= self.fixed_node < n:
            raise ValueError(f"fixed node {self.fixed_node} out of range for {n} nodes")
        for e in self.edges:
            if not (0 <= e.from_id < n and 0 <= e.to_id < n):
                raise ValueError(f"edge ({e.from_id},{e.to_id}) references missing node")
        if self.timestamps is not None and len(self.timestamps) != n:
            raise ValueError("timestamp table length must match node count")

    def odometry_chain(self) -> list:
        """Consecutive odometry edges sorted by source node; raises if they do
        not form a connected chain over all nodes."""
        chain = sorted(
            (e for e in self.edges if e.kind is EdgeKind.ODOMETRY), key=lambda e: e.from_id
        )
        expected = len(self.nodes) - 1
        if len(chain) != expected or any(
            e.from_id != k or e.to_id != k + 1 for k, e in enumerate(chain)
        ):
            raise ValueError("odometry edges do not form a connected chain over all nodes")
        return chain

    def node_timestamps(self) -> list:
        if self.timestamps is not None:
            return list(self.timestamps)
        return [float(k) for k in range(len(self.nodes))]


def from_odometry(traj: Trajectory, information=None) -> PoseGraph:
    """Build the odometry-only graph: one node per keyframe (initialized at the
    keyframe pose), consecutive relative-pose edges, node 0 fixed."""
    if len(traj) < 2:
        raise ValueError("need at least 2 trajectory points to build a pose graph")
    info = np.eye(6) if information is None else _check_information(information)
    poses = traj.poses()
    edges = [
        Edge(k, k + 1, geometry.relative(poses[k], poses[k + 1]), info, EdgeKind.ODOMETRY)
        for k in range(len(poses) - 1)
    ]
    return PoseGraph(
        nodes=list(poses),
        edges=edges,
        fixed_node=0,
        timestamps=[p.timestamp for p in traj.points],
    )


def dead_reckon(graph: PoseGraph) -> Trajectory:
    """Chain odometry measurements outward from the fixed node's pose."""
    chain = graph.odometry_chain()
    cum = [Pose.identity()]
    for e in chain:
        cum.append(geometry.compose(cum[-1], e.measurement))
    f = graph.fixed_node
    if f == 0:
        poses = [geometry.compose(graph.nodes[0], c) for c in cum]
    else:
        anchor = geometry.compose(graph.nodes[f], geometry.inverse(cum[f]))
        poses = [geometry.compose(anchor, c) for c in cum]
    stamps = graph.node_timestamps()
    return Trajectory([TrajectoryPoint(ts, p) for ts, p in zip(stamps, poses)])
