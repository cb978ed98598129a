"""File formats: TUM trajectories, g2o pose graphs, loop-candidate and verdict
CSVs, metric reports, and key=value manifests. All writers are atomic
(temp file + rename) and emit floats with 9 significant digits, which makes
serialize -> parse -> serialize byte-stable."""

from __future__ import annotations

import logging
import os
import tempfile
from typing import Optional, Sequence

import numpy as np

from loopgate.geometry import Pose
from loopgate.graph import Edge, EdgeKind, LoopCandidate, PoseGraph, Trajectory, TrajectoryPoint

log = logging.getLogger(__name__)

_TRIU = [(i, j) for i in range(6) for j in range(i, 6)]


class ParseError(ValueError):
    def __init__(self, path, lineno: int, message: str):
        super().__init__(f"{path}:{lineno}: {message}")
        self.path = path
        self.lineno = lineno


def fmt(x: float) -> str:
    """9-significant-digit float, -0 normalized."""
    return f"{float(x) + 0.0:.9g}"


def atomic_write_text(path, text: str) -> None:
    path = os.fspath(path)
    d = os.path.dirname(path) or "."
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-", suffix="~")
    try:
        with os.fdopen(fd, "w") as f:
            f.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


# ---------------------------------------------------------------------------
# TUM trajectories: "timestamp tx ty tz qx qy qz qw"


def format_tum(traj: Trajectory) -> str:
    lines = ["# timestamp tx ty tz qx qy qz qw"]
    for p in traj.points:
        q, t = p.pose.q, p.pose.t
        lines.append(
            " ".join(
                [fmt(p.timestamp), fmt(t[0]), fmt(t[1]), fmt(t[2]), fmt(q[1]), fmt(q[2]), fmt(q[3]), fmt(q[0])]
            )
        )
    return "\n".join(lines) + "\n"


def parse_tum(text: str, path="<tum>") -> Trajectory:
    points = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if len(parts) != 8:
            raise ParseError(path, lineno, f"expected 8 fields, got {len(parts)}")
        try:
            vals = [float(v) for v in parts]
        except ValueError as e:
            raise ParseError(path, lineno, str(e)) from None
        ts, tx, ty, tz, qx, qy, qz, qw = vals
        points.append(TrajectoryPoint(ts, Pose(np.array([qw, qx, qy, qz]), np.array([tx, ty, tz]))))
    if not points:
        raise ParseError(path, 0, "no trajectory points found")
    try:
        return Trajectory(points)
    except ValueError as e:
        raise ParseError(path, 0, str(e)) from None


def write_tum(path, traj: Trajectory) -> None:
    atomic_write_text(path, format_tum(traj))


def read_tum(path) -> Trajectory:
    with open(path) as f:
        return parse_tum(f.read(), path=path)


# ---------------------------------------------------------------------------
# g2o: VERTEX_SE3:QUAT / EDGE_SE3:QUAT with 21 upper-triangular info entries


def format_g2o(graph: PoseGraph) -> str:
    lines = []
    for i, pose in enumerate(graph.nodes):
        q, t = pose.q, pose.t
        lines.append(
            "VERTEX_SE3:QUAT "
            + " ".join([str(i), fmt(t[0]), fmt(t[1]), fmt(t[2]), fmt(q[1]), fmt(q[2]), fmt(q[3]), fmt(q[0])])
        )
    for e in graph.edges:
        q, t = e.measurement.q, e.measurement.t
        fields = [
            str(e.from_id),
            str(e.to_id),
            fmt(t[0]),
            fmt(t[1]),
            fmt(t[2]),
            fmt(q[1]),
            fmt(q[2]),
            fmt(q[3]),
            fmt(q[0]),
        ] + [fmt(e.information[i, j]) for i, j in _TRIU]
        lines.append("EDGE_SE3:QUAT " + " ".join(fields))
    return "\n".join(lines) + "\n"


def parse_g2o(text: str, path="<g2o>") -> PoseGraph:
    vertices = {}
    raw_edges = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        tag = parts[0]
        if tag == "VERTEX_SE3:QUAT":
            if len(parts) != 9:
                raise ParseError(path, lineno, f"vertex needs 9 fields, got {len(parts)}")
            try:
                vid = int(parts[1])
                tx, ty, tz, qx, qy, qz, qw = (float(v) for v in parts[2:])
            except ValueError as e:
                raise ParseError(path, lineno, str(e)) from None
            if vid in vertices:
                raise ParseError(path, lineno, f"duplicate vertex id {vid}")
            vertices[vid] = Pose(np.array([qw, qx, qy, qz]), np.array([tx, ty, tz]))
        elif tag == "EDGE_SE3:QUAT":
            if len(parts) != 31:
                raise ParseError(path, lineno, f"edge needs 31 fields, got {len(parts)}")
            try:
                fr, to = int(parts[1]), int(parts[2])
                vals = [float(v) for v in parts[3:]]
            except ValueError as e:
                raise ParseError(path, lineno, str(e)) from None
            tx, ty, tz, qx, qy, qz, qw = vals[:7]
            info = np.zeros((6, 6))
            for (i, j), v in zip(_TRIU, vals[7:]):
                info[i, j] = v
                info[j, i] = v
            measurement = Pose(np.array([qw, qx, qy, qz]), np.array([tx, ty, tz]))
            kind = EdgeKind.ODOMETRY if to == fr + 1 else EdgeKind.LOOP
            try:
                raw_edges.append(Edge(fr, to, measurement, info, kind))
            except ValueError as e:
                raise ParseError(path, lineno, str(e)) from None
        else:
            log.warning("%s:%d: skipping unknown g2o tag %r", path, lineno, tag)
    if not vertices:
        raise ParseError(path, 0, "no vertices found")
    n = len(vertices)
    if sorted(vertices) != list(range(n)):
        raise ParseError(path, 0, "vertex ids must be contiguous from 0")
    nodes = [vertices[i] for i in range(n)]
    try:
        return PoseGraph(nodes=nodes, edges=raw_edges, fixed_node=0)
    except ValueError as e:
        raise ParseError(path, 0, str(e)) from None


def write_g2o(path, graph: PoseGraph) -> None:
    atomic_write_text(path, format_g2o(graph))


def read_g2o(path) -> PoseGraph:
    with open(path) as f:
        return parse_g2o(f.read(), path=path)


# ---------------------------------------------------------------------------
# loop-candidate CSV


CANDIDATE_HEADER = "query_id,match_id,tx,ty,tz,qx,qy,qz,qw,label"


def format_candidates(candidates: Sequence[LoopCandidate]) -> str:
    lines = [CANDIDATE_HEADER]
    for c in candidates:
        q, t = c.measurement.q, c.measurement.t
        label = "" if c.label is None else str(int(c.label))
        lines.append(
            ",".join(
                [str(c.query_id), str(c.match_id), fmt(t[0]), fmt(t[1]), fmt(t[2]), fmt(q[1]), fmt(q[2]), fmt(q[3]), fmt(q[0]), label]
            )
        )
    return "\n".join(lines) + "\n"


def parse_candidates(text: str, path="<candidates>") -> list:
    lines = text.splitlines()
    if not lines or lines[0].strip() != CANDIDATE_HEADER:
        raise ParseError(path, 1, f"expected header {CANDIDATE_HEADER!r}")
    out = []
    for lineno, raw in enumerate(lines[1:], start=2):
        line = raw.strip()
        if not line:
            continue
        parts = line.split(",")
        if len(parts) != 10:
            raise ParseError(path, lineno, f"expected 10 fields, got {len(parts)}")
        try:
            qid, mid = int(parts[0]), int(parts[1])
            tx, ty, tz, qx, qy, qz, qw = (float(v) for v in parts[2:9])
            label_field = parts[9].strip()
            label = None if label_field == "" else bool(int(label_field))
            if label_field not in ("", "0", "1"):
                raise ValueError(f"label must be 0, 1 or empty, got {label_field!r}")
        except ValueError as e:
            raise ParseError(path, lineno, str(e)) from None
        try:
            out.append(
                LoopCandidate(
                    qid, mid, Pose(np.array([qw, qx, qy, qz]), np.array([tx, ty, tz])), label=label
                )
            )
        except ValueError as e:
            raise ParseError(path, lineno, str(e)) from None
    return out


def write_candidates(path, candidates: Sequence[LoopCandidate]) -> None:
    atomic_write_text(path, format_candidates(candidates))


def read_candidates(path) -> list:
    with open(path) as f:
        return parse_candidates(f.read(), path=path)


# ---------------------------------------------------------------------------
# verdict CSV (one row per verification, in verification order)


VERDICT_HEADER = "query_id,match_id,score,converged,accepted,label"


def format_verdicts(verdicts) -> str:
    lines = [VERDICT_HEADER]
    for v in verdicts:
        score = "" if v.score is None else fmt(v.score)
        label = "" if v.candidate.label is None else str(int(v.candidate.label))
        lines.append(
            ",".join(
                [
                    str(v.candidate.query_id),
                    str(v.candidate.match_id),
                    score,
                    str(int(v.converged)),
                    str(int(v.accepted)),
                    label,
                ]
            )
        )
    return "\n".join(lines) + "\n"


def write_verdicts(path, verdicts) -> None:
    atomic_write_text(path, format_verdicts(verdicts))


def parse_verdict_rows(text: str, path="<verdicts>") -> list:
    """Rows as (query_id, match_id, score|None, converged, accepted, label|None)."""
    lines = text.splitlines()
    if not lines or lines[0].strip() != VERDICT_HEADER:
        raise ParseError(path, 1, f"expected header {VERDICT_HEADER!r}")
    rows = []
    for lineno, raw in enumerate(lines[1:], start=2):
        line = raw.strip()
        if not line:
            continue
        parts = line.split(",")
        if len(parts) != 6:
            raise ParseError(path, lineno, f"expected 6 fields, got {len(parts)}")
        try:
            qid, mid = int(parts[0]), int(parts[1])
            score = None if parts[2] == "" else float(parts[2])
            converged = bool(int(parts[3]))
            accepted = bool(int(parts[4]))
            label = None if parts[5] == "" else bool(int(parts[5]))
        except ValueError as e:
            raise ParseError(path, lineno, str(e)) from None
        rows.append((qid, mid, score, converged, accepted, label))
    return rows


def read_verdict_rows(path) -> list:
    with open(path) as f:
        return parse_verdict_rows(f.read(), path=path)


# ---------------------------------------------------------------------------
# metric report CSV and key=value manifests


def format_metrics(rows: Sequence[tuple]) -> str:
    return "metric,value\n" + "".join(f"{k},{v}\n" for k, v in rows)


def write_metrics(path, rows: Sequence[tuple]) -> None:
    atomic_write_text(path, format_metrics(rows))


def format_manifest(entries: dict) -> str:
    lines = []
    for key, value in entries.items():
        if isinstance(value, bool):
            rendered = "true" if value else "false"
        elif isinstance(value, (int, float)):
            rendered = fmt(value) if isinstance(value, float) else str(value)
        else:
            rendered = '"' + str(value).replace("\\", "\\\\").replace('"', '\\"') + '"'
        lines.append(f"{key} = {rendered}")
    return "\n".join(lines) + "\n"


def write_manifest(path, entries: dict) -> None:
    atomic_write_text(path, format_manifest(entries))


def parse_manifest(text: str):
    out = {}
    for raw in text.splitlines():
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        key, _, value = line.partition("=")
        key = key.strip()
        value = value.strip()
        if value.startswith('"') and value.endswith('"'):
            out[key] = value[1:-1].replace('\\"', '"').replace("\\\\", "\\")
        elif value in ("true", "false"):
            out[key] = value == "true"
        else:
            try:
                out[key] = int(value)
            except ValueError:
                try:
                    out[key] = float(value)
                except ValueError:
                    out[key] = value
    return out


def read_manifest(path):
    with open(path) as f:
        return parse_manifest(f.read())
