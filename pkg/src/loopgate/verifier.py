"""Loop-candidate verification: re-optimize the trajectory with the candidate
constraint, score how much the trajectory changed (post-alignment RMSE), and
accept only converged solves whose score stays under the threshold.

A sequential session mirrors a SLAM loop-closing thread: keyframes arrive one
at a time, candidates are verified in arrival order against the current
working trajectory, and an accepted loop replaces the working trajectory with
the corrected one so later candidates see its effect.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import List, Optional, Sequence, Tuple

import numpy as np

from loopgate import align, geometry
from loopgate.align import DegenerateGeometryError, PointCloudPair
from loopgate.graph import LoopCandidate, Trajectory, TrajectoryPoint, from_odometry
from loopgate.solver import SolveReport, SolverConfig, optimize


@dataclass
class VerifierConfig:
    """threshold_tau is the score cutoff in meters: candidates scoring above
    it (or failing to converge) are rejected."""

    threshold_tau: float
    solver: SolverConfig = field(default_factory=SolverConfig)
    reject_on_nonconvergence: bool = True
    odometry_information: Optional[np.ndarray] = None

    def __post_init__(self):
        if not self.threshold_tau > 0:
            raise ValueError("threshold_tau must be positive")
        if self.reject_on_nonconvergence is not True:
            raise ValueError("reject_on_nonconvergence is fixed true")


@dataclass(frozen=True)
class VerdictRecord:
    candidate: LoopCandidate
    score: Optional[float]
    converged: bool
    accepted: bool
    solve_report: SolveReport
    note: str = ""


def _verify_impl(
    traj: Trajectory, candidate: LoopCandidate, config: VerifierConfig, graph=None
) -> Tuple[VerdictRecord, Optional[Trajectory]]:
    n = len(traj)
    if candidate.query_id >= n or candidate.match_id >= n:
        raise ValueError(
            f"candidate ({candidate.query_id},{candidate.match_id}) references a keyframe "
            f"beyond the {n}-point trajectory"
        )
    if graph is None:
        graph = from_odometry(traj, config.odometry_information)
    optimized, report = optimize(graph, candidate, config.solver)
    if not report.converged:
        return VerdictRecord(candidate, None, False, False, report, "solver did not converge"), None
    if n < 3:
        return (
            VerdictRecord(candidate, None, True, False, report, "fewer than 3 keyframes, alignment undefined"),
            None,
        )
    try:
        score = align.change_score(PointCloudPair(traj.translations(), optimized.translations()))
    except DegenerateGeometryError as e:
        return VerdictRecord(candidate, None, True, False, report, f"degenerate alignment: {e}"), None
    accepted = score <= config.threshold_tau
    return VerdictRecord(candidate, score, True, accepted, report), optimized


def verify(traj: Trajectory, candidate: LoopCandidate, config: VerifierConfig) -> VerdictRecord:
    """Score one candidate against the trajectory; the input is not modified."""
    verdict, _ = _verify_impl(traj, candidate, config)
    return verdict


def run_batch(
    traj: Trajectory, candidates: Sequence[LoopCandidate], config: VerifierConfig
) -> List[VerdictRecord]:
    """Verify every candidate independently against the same frozen trajectory."""
    graph = from_odometry(traj, config.odometry_information) if len(traj) >= 2 else None
    return [_verify_impl(traj, c, config, graph)[0] for c in candidates]


@dataclass(frozen=True)
class SessionState:
    """Running state of a sequential verification session. `raw_points` is the
    odometry as received; `points` is the working trajectory, rebased onto
    corrected poses after each accepted loop."""

    config: VerifierConfig
    correct_on_accept: bool = True
    raw_points: tuple = ()
    points: tuple = ()
    accepted_loops: tuple = ()

    def trajectory(self) -> Trajectory:
        return Trajectory(self.points)


def session_step(
    state: SessionState, keyframe: TrajectoryPoint, candidates: Sequence[LoopCandidate] = ()
) -> Tuple[SessionState, List[VerdictRecord]]:
    """Append one keyframe, then verify its candidates in arrival order; each
    candidate sees the corrections applied by previously accepted ones."""
    if state.raw_points and keyframe.timestamp <= state.raw_points[-1].timestamp:
        raise ValueError(
            f"keyframe timestamp {keyframe.timestamp} not after {state.raw_points[-1].timestamp}"
        )
    if state.raw_points:
        # odometry increment from the raw stream, replayed on the corrected head
        step = geometry.relative(state.raw_points[-1].pose, keyframe.pose)
        working = TrajectoryPoint(
            keyframe.timestamp, geometry.compose(state.points[-1].pose, step)
        )
    else:
        working = keyframe
    raw_points = state.raw_points + (keyframe,)
    points = state.points + (working,)
    n = len(points)

    verdicts = []
    accepted_loops = state.accepted_loops
    for cand in candidates:
        if cand.query_id >= n or cand.match_id >= n:
            raise ValueError(
                f"candidate ({cand.query_id},{cand.match_id}) references a keyframe "
                f"beyond the {n}-point session"
            )
        verdict, optimized = _verify_impl(Trajectory(points), cand, state.config)
        verdicts.append(verdict)
        if verdict.accepted:
            accepted_loops = accepted_loops + (cand,)
            if state.correct_on_accept and optimized is not None:
                points = tuple(optimized.points)
    return (
        replace(state, raw_points=raw_points, points=points, accepted_loops=accepted_loops),
        verdicts,
    )


def replay_sequential(
    traj: Trajectory,
    candidates: Sequence[LoopCandidate],
    config: VerifierConfig,
    correct_on_accept: bool = True,
) -> List[VerdictRecord]:
    """Stream a recorded trajectory through a session, presenting each
    candidate at its query keyframe's step (file order within a step)."""
    by_query = {}
    for c in candidates:
        by_query.setdefault(c.query_id, []).append(c)
    state = SessionState(config=config, correct_on_accept=correct_on_accept)
    out: List[VerdictRecord] = []
    for k, point in enumerate(traj.points):
        state, verdicts = session_step(state, point, by_query.get(k, ()))
        out.extend(verdicts)
    dangling = [c for k, group in by_query.items() if k >= len(traj) for c in group]
    if dangling:
        c = dangling[0]
        raise ValueError(
            f"candidate ({c.query_id},{c.match_id}) references a keyframe beyond the trajectory"
        )
    return out
