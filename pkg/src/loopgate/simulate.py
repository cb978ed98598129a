"""Synthetic proof-of-concept scenarios: ground-truth trajectories with
revisits, Gaussian-noise odometry corruption, and labeled true/false loop
candidates modeling perceptual aliasing."""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from loopgate import geometry, io
from loopgate.geometry import Pose, Tangent6
from loopgate.graph import LoopCandidate, Trajectory, TrajectoryPoint, from_odometry

SHAPES = ("grid_loop", "circle", "figure_eight", "multi_floor_stack")


class UnsatisfiableSpecError(ValueError):
    """Requested candidate counts cannot be drawn from the trajectory."""


def rng_for(seed: int, *key: int) -> np.random.Generator:
    """Deterministic child stream: one 64-bit seed split by a counter key."""
    return np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=key))


@dataclass(frozen=True)
class ScenarioSpec:
    shape: str
    keyframe_count: int = 200
    keyframe_spacing: float = 0.5
    floor_height: float = 3.0
    seed: int = 0
    open_loop: bool = False

    def __post_init__(self):
        if self.shape not in SHAPES:
            raise ValueError(f"shape must be one of {SHAPES}, got {self.shape!r}")
        if self.keyframe_count < 10:
            raise ValueError("keyframe_count must be >= 10")
        if not self.keyframe_spacing > 0:
            raise ValueError("keyframe_spacing must be positive")
        if self.shape == "multi_floor_stack" and not self.floor_height > 0:
            raise ValueError("floor_height must be positive")


@dataclass(frozen=True)
class NoiseSpec:
    """One noise knob: per-step translational std is sigma meters on each
    axis, rotational std is rot_ratio * sigma radians on each tangent axis."""

    sigma: float
    rot_ratio: float = 0.1

    def __post_init__(self):
        if self.sigma < 0:
            raise ValueError("sigma must be nonnegative")
        if self.rot_ratio < 0:
            raise ValueError("rot_ratio must be nonnegative")


@dataclass(frozen=True)
class CandidateSpec:
    true_loop_radius: float = 1.0
    false_loop_min_distance: float = 10.0
    true_count: int = 20
    false_count: int = 20
    measurement_noise: NoiseSpec = field(default_factory=lambda: NoiseSpec(0.0))
    min_temporal_gap: int = 10
    aliasing: str = "near_identity"  # near_identity | copy_true | mixed

    def __post_init__(self):
        if not self.true_loop_radius > 0:
            raise ValueError("true_loop_radius must be positive")
        if not self.false_loop_min_distance > self.true_loop_radius:
            raise ValueError("false_loop_min_distance must exceed true_loop_radius")
        if self.true_count < 0 or self.false_count < 0:
            raise ValueError("candidate counts must be nonnegative")
        if self.min_temporal_gap < 1:
            raise ValueError("min_temporal_gap must be >= 1")
        if self.aliasing not in ("near_identity", "copy_true", "mixed"):
            raise ValueError(f"unknown aliasing mode {self.aliasing!r}")


# ---------------------------------------------------------------------------
# ground-truth shapes


def _yaw_pose(x: float, y: float, z: float, yaw: float) -> Pose:
    return Pose(geometry.quat_exp([0.0, 0.0, yaw]), [x, y, z])


def _circle_points(n: int, d: float, arc_fraction: float) -> List[Pose]:
    radius = n * d / (2.0 * np.pi * arc_fraction)
    poses = []
    for k in range(n):
        a = k * d / radius
        poses.append(
            _yaw_pose(radius * np.cos(a), radius * np.sin(a), 0.0, a + np.pi / 2.0)
        )
    return poses


def _walk_polyline(waypoints: np.ndarray, n: int, d: float) -> List[Pose]:
    """n poses spaced d apart along the polyline, yaw following the segment."""
    seg = np.diff(waypoints, axis=0)
    seg_len = np.linalg.norm(seg, axis=1)
    cum = np.concatenate([[0.0], np.cumsum(seg_len)])
    total = cum[-1]
    poses = []
    for k in range(n):
        s = min(k * d, total - 1e-12)
        i = int(np.searchsorted(cum, s, side="right")) - 1
        i = min(i, len(seg) - 1)
        frac = (s - cum[i]) / seg_len[i]
        p = waypoints[i] + frac * seg[i]
        yaw = float(np.arctan2(seg[i][1], seg[i][0]))
        poses.append(_yaw_pose(p[0], p[1], p[2], yaw))
    return poses


def _grid_loop_points(n: int, d: float, open_loop: bool) -> List[Pose]:
    total = (n - 1) * d
    if open_loop:
        a = total / 3.5  # perimeter stopped half a side short of closing
        wp = [(0, 0, 0), (a, 0, 0), (a, a, 0), (0, a, 0), (0, a / 2.0, 0)]
    else:
        a = total / 5.0  # full block plus the first side walked again
        wp = [(0, 0, 0), (a, 0, 0), (a, a, 0), (0, a, 0), (0, 0, 0), (a, 0, 0)]
    return _walk_polyline(np.array(wp, dtype=float), n, d)


def _figure_eight_points(n: int, d: float, open_loop: bool) -> List[Pose]:
    if open_loop:
        return _circle_points(n, d, 0.75)
    r = (n - 1) * d / (4.0 * np.pi)
    poses = []
    for k in range(n):
        s = k * d
        if s < 2.0 * np.pi * r:  # right lobe, counterclockwise from the crossing
            u = s / r
            x, y = r * (1.0 - np.cos(u)), r * np.sin(u)
            yaw = float(np.arctan2(np.cos(u), np.sin(u)))
        else:  # left lobe, clockwise, tangent-continuous at the crossing
            v = (s - 2.0 * np.pi * r) / r
            x, y = -r * (1.0 - np.cos(v)), r * np.sin(v)
            yaw = float(np.arctan2(np.cos(v), -np.sin(v)))
        poses.append(_yaw_pose(x, y, 0.0, yaw))
    return poses


def _multi_floor_points(n: int, d: float, h: float, open_loop: bool) -> List[Pose]:
    total = (n - 1) * d
    if open_loop:
        # straight corridor with a mid ramp: two plateaus, no revisit
        flat = 0.4 * total
        ramp_h = np.sqrt(max((0.2 * total) ** 2 - h * h, (0.05 * total) ** 2))
        wp = [
            (0, 0, 0),
            (flat, 0, 0),
            (flat + ramp_h, 0, h),
            (flat + ramp_h + flat, 0, h),
        ]
        return _walk_polyline(np.array(wp, dtype=float), n, d)
    # identical rectangle lap on each floor, connected by a straight ramp:
    # 2 laps of perimeter 3a (b = a/2) plus a ramp of length sqrt(a^2 + h^2)
    a = (6.0 * total - np.sqrt(total * total + 35.0 * h * h)) / 35.0
    if a <= 0:
        raise ValueError("trajectory too short for the requested floor height")
    b = a / 2.0
    wp = [
        (0, 0, 0),
        (a, 0, 0),
        (a, b, 0),
        (0, b, 0),
        (0, 0, 0),  # floor-0 lap closed
        (a, 0, h),  # ramp climbs along the first edge
        (a, b, h),
        (0, b, h),
        (0, 0, h),
        (a, 0, h),  # floor-1 lap, same footprint
    ]
    return _walk_polyline(np.array(wp, dtype=float), n, d)


def generate_ground_truth(spec: ScenarioSpec) -> Trajectory:
    """Deterministic ground-truth trajectory for the scenario, 1 s per keyframe."""
    n, d = spec.keyframe_count, spec.keyframe_spacing
    if spec.shape == "circle":
        poses = _circle_points(n, d, 0.75 if spec.open_loop else 1.0)
    elif spec.shape == "grid_loop":
        poses = _grid_loop_points(n, d, spec.open_loop)
    elif spec.shape == "figure_eight":
        poses = _figure_eight_points(n, d, spec.open_loop)
    else:
        poses = _multi_floor_points(n, d, spec.floor_height, spec.open_loop)
    return Trajectory([TrajectoryPoint(float(k), p) for k, p in enumerate(poses)])


# ---------------------------------------------------------------------------
# odometry corruption and candidate generation


def _noise_tangent(rng: np.random.Generator, noise: NoiseSpec) -> Tangent6:
    return Tangent6(
        rng.normal(0.0, noise.sigma, 3), rng.normal(0.0, noise.rot_ratio * noise.sigma, 3)
    )


def corrupt_odometry(gt: Trajectory, noise: NoiseSpec, seed: int) -> Trajectory:
    """Perturb each relative step by exp of a Gaussian tangent and re-chain
    from the first pose. sigma = 0 returns the input unchanged."""
    if noise.sigma == 0.0:
        return Trajectory(list(gt.points))
    rng = rng_for(seed)
    poses = gt.poses()
    out = [poses[0]]
    for k in range(len(poses) - 1):
        step = geometry.relative(poses[k], poses[k + 1])
        noisy = geometry.compose(step, geometry.exp(_noise_tangent(rng, noise)))
        out.append(geometry.compose(out[-1], noisy))
    return Trajectory(
        [TrajectoryPoint(p.timestamp, pose) for p, pose in zip(gt.points, out)]
    )


def _eligible_pairs(positions: np.ndarray, gap: int):
    """(i, j, distance) arrays over all pairs with i - j >= gap."""
    n = len(positions)
    ii, jj = np.triu_indices(n, k=gap)
    # triu gives j > i; swap so the first index is the later keyframe
    q, m = jj, ii
    dist = np.linalg.norm(positions[q] - positions[m], axis=1)
    return q, m, dist


def generate_candidates(
    gt: Trajectory, spec: CandidateSpec, seed: int
) -> List[LoopCandidate]:
    """Labeled candidates: true loops pair revisits (GT distance within
    true_loop_radius) and carry the GT relative pose plus measurement noise;
    false loops pair far-apart keyframes with an aliased measurement."""
    rng = rng_for(seed)
    positions = gt.translations()
    poses = gt.poses()
    q, m, dist = _eligible_pairs(positions, spec.min_temporal_gap)

    true_pool = np.nonzero(dist <= spec.true_loop_radius)[0]
    false_pool = np.nonzero(dist >= spec.false_loop_min_distance)[0]
    if len(true_pool) < spec.true_count:
        raise UnsatisfiableSpecError(
            f"requested {spec.true_count} true loops but only {len(true_pool)} revisit pairs "
            f"exist within {spec.true_loop_radius} m"
        )
    if len(false_pool) < spec.false_count:
        raise UnsatisfiableSpecError(
            f"requested {spec.false_count} false loops but only {len(false_pool)} pairs "
            f"are {spec.false_loop_min_distance} m apart"
        )

    true_pick = rng.choice(true_pool, size=spec.true_count, replace=False)
    false_pick = rng.choice(false_pool, size=spec.false_count, replace=False)

    candidates = []
    true_rels = []
    for idx in true_pick:
        i, j = int(q[idx]), int(m[idx])
        rel = geometry.relative(poses[i], poses[j])
        true_rels.append(rel)
        meas = geometry.compose(rel, geometry.exp(_noise_tangent(rng, spec.measurement_noise)))
        candidates.append(LoopCandidate(i, j, meas, label=True))
    for idx in false_pick:
        i, j = int(q[idx]), int(m[idx])
        mode = spec.aliasing
        if mode == "mixed":
            mode = "copy_true" if (true_rels and rng.random() < 0.5) else "near_identity"
        if mode == "copy_true" and true_rels:
            base = true_rels[int(rng.integers(len(true_rels)))]
        else:
            # aliasing model: the spoofed place match reports "same pose again"
            base = Pose.identity()
        meas = geometry.compose(base, geometry.exp(_noise_tangent(rng, spec.measurement_noise)))
        candidates.append(LoopCandidate(i, j, meas, label=False))
    candidates.sort(key=lambda c: (c.query_id, c.match_id, not c.label))
    return candidates


# ---------------------------------------------------------------------------
# run emission


@dataclass
class SimulatedRun:
    ground_truth: Trajectory
    odometry: Trajectory
    candidates: List[LoopCandidate]


def odometry_information(noise: NoiseSpec) -> np.ndarray:
    """diag(1/sigma^2) per block; identity at sigma = 0 (no preference)."""
    if noise.sigma == 0.0:
        return np.eye(6)
    st = noise.sigma
    sr = max(noise.rot_ratio * noise.sigma, 1e-6 * noise.sigma)
    return np.diag([1.0 / st**2] * 3 + [1.0 / sr**2] * 3)


def simulate_run(
    scenario: ScenarioSpec,
    noise: NoiseSpec,
    candidate_spec: CandidateSpec,
    out_dir: Optional[str] = None,
) -> SimulatedRun:
    """Generate one full scenario; when out_dir is given, write gt.tum,
    odometry.tum, graph.g2o, candidates.csv and manifest.toml there."""
    gt = generate_ground_truth(scenario)
    odometry = corrupt_odometry(gt, noise, scenario.seed)
    candidates = generate_candidates(gt, candidate_spec, scenario.seed + 1)
    run = SimulatedRun(gt, odometry, candidates)
    if out_dir is not None:
        os.makedirs(out_dir, exist_ok=True)
        io.write_tum(os.path.join(out_dir, "gt.tum"), gt)
        io.write_tum(os.path.join(out_dir, "odometry.tum"), odometry)
        graph = from_odometry(odometry, odometry_information(noise))
        io.write_g2o(os.path.join(out_dir, "graph.g2o"), graph)
        io.write_candidates(os.path.join(out_dir, "candidates.csv"), candidates)
        io.write_manifest(
            os.path.join(out_dir, "manifest.toml"),
            {
                "shape": scenario.shape,
                "keyframes": scenario.keyframe_count,
                "spacing": scenario.keyframe_spacing,
                "floor_height": scenario.floor_height,
                "open_loop": scenario.open_loop,
                "sigma": noise.sigma,
                "rot_ratio": noise.rot_ratio,
                "seed": scenario.seed,
                "true_loops": candidate_spec.true_count,
                "false_loops": candidate_spec.false_count,
            },
        )
    return run
