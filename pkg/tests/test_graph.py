import numpy as np
import pytest

from loopgate import geometry as g
from loopgate.geometry import Pose
from loopgate.graph import (
    Edge,
    EdgeKind,
    LoopCandidate,
    PoseGraph,
    Trajectory,
    TrajectoryPoint,
    dead_reckon,
    from_odometry,
)

from conftest import random_pose


def make_traj(poses):
    return Trajectory([TrajectoryPoint(float(k), p) for k, p in enumerate(poses)])


def test_trajectory_requires_increasing_timestamps():
    p = Pose.identity()
    with pytest.raises(ValueError):
        Trajectory([TrajectoryPoint(1.0, p), TrajectoryPoint(1.0, p)])
    with pytest.raises(ValueError):
        Trajectory([])


def test_two_point_chain_unit_step():
    traj = make_traj([Pose.identity(), Pose([1, 0, 0, 0], [1, 0, 0])])
    graph = from_odometry(traj)
    assert len(graph.edges) == 1
    e = graph.edges[0]
    assert e.kind is EdgeKind.ODOMETRY
    assert np.allclose(e.measurement.t, [1, 0, 0], atol=1e-15)
    assert e.measurement.rotation_angle() < 1e-15


def test_from_odometry_structure(rng):
    poses = [random_pose(rng) for _ in range(17)]
    graph = from_odometry(make_traj(poses))
    assert len(graph.nodes) == 17
    assert len(graph.edges) == 16
    assert graph.fixed_node == 0
    assert [e.from_id for e in graph.edges] == list(range(16))


def test_from_odometry_needs_two_points():
    with pytest.raises(ValueError):
        from_odometry(make_traj([Pose.identity()]))


def test_dead_reckon_inverts_from_odometry(rng):
    poses = [random_pose(rng) for _ in range(40)]
    traj = make_traj(poses)
    back = dead_reckon(from_odometry(traj))
    for a, b in zip(traj.points, back.points):
        assert a.timestamp == b.timestamp
        assert np.allclose(a.pose.t, b.pose.t, atol=1e-12)
        delta = g.compose(g.inverse(a.pose), b.pose)
        assert delta.rotation_angle() < 1e-12


def test_dead_reckon_single_edge():
    graph = PoseGraph(
        nodes=[Pose.identity(), Pose.identity()],
        edges=[Edge(0, 1, Pose([1, 0, 0, 0], [0, 0, 1]), np.eye(6), EdgeKind.ODOMETRY)],
    )
    traj = dead_reckon(graph)
    assert np.allclose(traj.points[1].pose.t, [0, 0, 1], atol=1e-15)


def test_dead_reckon_circle_arc_heading():
    # 10 identical arc steps turn the heading by 10x the step angle
    step_angle = 0.17
    u = Pose(g.quat_exp([0, 0, step_angle]), [0.5, 0, 0])
    edges = [Edge(k, k + 1, u, np.eye(6), EdgeKind.ODOMETRY) for k in range(10)]
    graph = PoseGraph(nodes=[Pose.identity()] * 11, edges=edges)
    traj = dead_reckon(graph)
    final = traj.points[-1].pose
    assert abs(g.quat_log(final.q)[2] - 10 * step_angle) < 1e-12


def test_dead_reckon_requires_connected_chain():
    graph = PoseGraph(
        nodes=[Pose.identity()] * 3,
        edges=[Edge(0, 1, Pose.identity(), np.eye(6), EdgeKind.ODOMETRY)],
    )
    with pytest.raises(ValueError):
        dead_reckon(graph)


def test_edge_validation():
    with pytest.raises(ValueError):
        Edge(2, 2, Pose.identity(), np.eye(6), EdgeKind.LOOP)
    bad = np.eye(6)
    bad[0, 5] = 1e-3  # asymmetric
    with pytest.raises(ValueError):
        Edge(0, 1, Pose.identity(), bad, EdgeKind.LOOP)
    with pytest.raises(ValueError):
        Edge(0, 1, Pose.identity(), -np.eye(6), EdgeKind.LOOP)


def test_posegraph_rejects_dangling_edge():
    with pytest.raises(ValueError):
        PoseGraph(
            nodes=[Pose.identity()] * 2,
            edges=[Edge(0, 5, Pose.identity(), np.eye(6), EdgeKind.LOOP)],
        )


def test_candidate_normalization(rng):
    meas = random_pose(rng)
    c = LoopCandidate(3, 11, meas, label=True)
    assert c.query_id == 11 and c.match_id == 3
    undone = g.compose(c.measurement, meas)
    assert undone.rotation_angle() < 1e-12
    assert np.linalg.norm(undone.t) < 1e-12
    assert c.label is True

    kept = LoopCandidate(11, 3, meas)
    assert kept.query_id == 11
    assert np.allclose(kept.measurement.t, meas.t)

    with pytest.raises(ValueError):
        LoopCandidate(4, 4, meas)
