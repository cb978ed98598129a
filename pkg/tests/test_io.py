import logging

import numpy as np
import pytest

from loopgate import io
from loopgate.geometry import Pose
from loopgate.graph import Edge, EdgeKind, LoopCandidate, PoseGraph, Trajectory, TrajectoryPoint

from conftest import random_pose


def make_traj(rng, n=9):
    return Trajectory(
        [TrajectoryPoint(0.25 * k + 1000.0, random_pose(rng)) for k in range(n)]
    )


def make_graph(rng, n=7):
    info = np.diag([4.0, 4.0, 4.0, 9.0, 9.0, 9.0])
    edges = [
        Edge(k, k + 1, random_pose(rng), info, EdgeKind.ODOMETRY) for k in range(n - 1)
    ]
    edges.append(Edge(n - 1, 0, random_pose(rng), np.eye(6), EdgeKind.LOOP))
    return PoseGraph(nodes=[random_pose(rng) for _ in range(n)], edges=edges)


def test_tum_roundtrip_byte_stable(rng):
    traj = make_traj(rng)
    first = io.format_tum(traj)
    second = io.format_tum(io.parse_tum(first))
    assert first == second


def test_tum_parse_values_close(rng):
    traj = make_traj(rng)
    back = io.parse_tum(io.format_tum(traj))
    assert len(back) == len(traj)
    for a, b in zip(traj.points, back.points):
        assert abs(a.timestamp - b.timestamp) < 1e-6 * max(1.0, abs(a.timestamp))
        assert np.allclose(a.pose.t, b.pose.t, rtol=1e-8, atol=1e-8)


def test_tum_skips_comments_and_blank_lines():
    text = "# header\n\n0 1 2 3 0 0 0 1\n# mid comment\n1 4 5 6 0 0 0 1\n"
    traj = io.parse_tum(text)
    assert len(traj) == 2
    assert np.allclose(traj.points[1].pose.t, [4, 5, 6])


def test_tum_parse_error_carries_line_number(tmp_path):
    bad = tmp_path / "bad.tum"
    bad.write_text("0 1 2 3 0 0 0 1\n1 2 3\n")
    with pytest.raises(io.ParseError) as exc:
        io.read_tum(bad)
    assert ":2:" in str(exc.value)


def test_g2o_roundtrip_byte_stable(rng):
    graph = make_graph(rng)
    first = io.format_g2o(graph)
    second = io.format_g2o(io.parse_g2o(first))
    assert first == second


def test_g2o_roundtrip_structure(rng):
    graph = make_graph(rng)
    back = io.parse_g2o(io.format_g2o(graph))
    assert len(back.nodes) == len(graph.nodes)
    assert len(back.edges) == len(graph.edges)
    kinds = [e.kind for e in back.edges]
    assert kinds[:-1] == [EdgeKind.ODOMETRY] * (len(graph.edges) - 1)
    assert kinds[-1] is EdgeKind.LOOP
    for a, b in zip(graph.edges, back.edges):
        assert np.allclose(a.information, b.information, rtol=1e-8, atol=1e-9)


def test_g2o_unknown_tag_skipped_with_warning(caplog):
    text = (
        "VERTEX_SE3:QUAT 0 0 0 0 0 0 0 1\n"
        "VERTEX_SE3:QUAT 1 1 0 0 0 0 0 1\n"
        "FIX 0\n"
        "EDGE_SE3:QUAT 0 1 1 0 0 0 0 0 1 "
        "1 0 0 0 0 0 1 0 0 0 0 1 0 0 0 1 0 0 1 0 1\n"
    )
    with caplog.at_level(logging.WARNING):
        graph = io.parse_g2o(text)
    assert len(graph.nodes) == 2 and len(graph.edges) == 1
    assert any("FIX" in rec.message or "FIX" in str(rec) for rec in caplog.records)


def test_g2o_info_is_upper_triangular_row_major():
    info = np.arange(1, 37, dtype=float).reshape(6, 6)
    info = info @ info.T + 60 * np.eye(6)  # SPD with distinct entries
    graph = PoseGraph(
        nodes=[Pose.identity(), Pose.identity()],
        edges=[Edge(0, 1, Pose([1, 0, 0, 0], [1, 0, 0]), info, EdgeKind.ODOMETRY)],
    )
    line = [l for l in io.format_g2o(graph).splitlines() if l.startswith("EDGE")][0]
    vals = line.split()[10:]
    assert len(vals) == 21
    assert float(vals[0]) == pytest.approx(info[0, 0])
    assert float(vals[5]) == pytest.approx(info[0, 5])
    assert float(vals[6]) == pytest.approx(info[1, 1])
    assert float(vals[20]) == pytest.approx(info[5, 5])


def test_candidates_roundtrip(rng):
    cands = [
        LoopCandidate(30, 4, random_pose(rng), label=True),
        LoopCandidate(31, 5, random_pose(rng), label=False),
        LoopCandidate(40, 11, random_pose(rng), label=None),
    ]
    text = io.format_candidates(cands)
    assert text.splitlines()[0] == io.CANDIDATE_HEADER
    assert io.format_candidates(io.parse_candidates(text)) == text
    back = io.parse_candidates(text)
    assert [c.label for c in back] == [True, False, None]
    for a, b in zip(cands, back):
        assert (a.query_id, a.match_id) == (b.query_id, b.match_id)
        assert np.allclose(a.measurement.t, b.measurement.t, rtol=1e-8, atol=1e-8)


def test_candidates_reject_bad_label(tmp_path):
    path = tmp_path / "c.csv"
    path.write_text(io.CANDIDATE_HEADER + "\n5,1,0,0,0,0,0,0,1,2\n")
    with pytest.raises(io.ParseError):
        io.read_candidates(path)


def test_manifest_roundtrip(tmp_path):
    entries = {
        "subcommand": "simulate",
        "sigma": 0.125,
        "seed": 42,
        "open_loop": False,
        "note": 'quoted "text" with \\ backslash',
    }
    path = tmp_path / "m.toml"
    io.write_manifest(path, entries)
    back = io.read_manifest(path)
    assert back == entries


def test_atomic_write_replaces_not_appends(tmp_path):
    path = tmp_path / "f.txt"
    io.atomic_write_text(path, "one\n")
    io.atomic_write_text(path, "two\n")
    assert path.read_text() == "two\n"
    assert list(tmp_path.iterdir()) == [path]


def test_fmt_normalizes_negative_zero():
    assert io.fmt(-0.0) == "0"
    assert io.fmt(0.1) == "0.1"
