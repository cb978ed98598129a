"""Command-line entry point: simulate scenarios, verify candidate files,
sweep noise levels into PR reports, and evaluate verdicts or trajectories.

Every subcommand is deterministic given its flags plus --seed; randomness is
split per sweep cell with counter-keyed child streams. A run manifest
(key = value) is written next to the outputs on success and on handled
failure."""

from __future__ import annotations

import argparse
import math
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor

import numpy as np

import loopgate
from loopgate import io, metrics, simulate, svgplot, verifier
from loopgate.graph import Trajectory
from loopgate.simulate import CandidateSpec, NoiseSpec, ScenarioSpec, UnsatisfiableSpecError
from loopgate.verifier import VerifierConfig


def _sweep_workers(cells: int) -> int:
    cap = os.environ.get("LOOPGATE_THREADS", "")
    if cap.strip():
        workers = int(cap)
    else:
        workers = min(4, os.cpu_count() or 1)
    return max(1, min(workers, cells))


def _scored_labels(verdicts) -> list:
    items = []
    for v in verdicts:
        if v.candidate.label is None:
            raise ValueError(
                f"candidate ({v.candidate.query_id},{v.candidate.match_id}) has no label; "
                "labeled candidates are required for PR metrics"
            )
        conf = -v.score if v.score is not None else -math.inf
        items.append(metrics.ScoredLabel(conf, bool(v.candidate.label)))
    return items


# ---------------------------------------------------------------------------
# subcommands


def cmd_simulate(args) -> dict:
    scenario = ScenarioSpec(
        shape=args.shape,
        keyframe_count=args.keyframes,
        keyframe_spacing=args.spacing,
        floor_height=args.floor_height,
        seed=args.seed,
        open_loop=args.open_loop,
    )
    noise = NoiseSpec(args.sigma, args.rot_ratio)
    cand = CandidateSpec(
        true_loop_radius=args.true_radius,
        false_loop_min_distance=args.false_min_distance,
        true_count=args.true_loops,
        false_count=args.false_loops,
        measurement_noise=NoiseSpec(args.measurement_sigma, args.rot_ratio),
        aliasing=args.aliasing,
    )
    simulate.simulate_run(scenario, noise, cand, args.out)
    return {
        "shape": args.shape,
        "keyframes": args.keyframes,
        "spacing": args.spacing,
        "floor_height": args.floor_height,
        "open_loop": args.open_loop,
        "sigma": args.sigma,
        "rot_ratio": args.rot_ratio,
        "measurement_sigma": args.measurement_sigma,
        "true_loops": args.true_loops,
        "false_loops": args.false_loops,
        "true_radius": args.true_radius,
        "false_min_distance": args.false_min_distance,
        "aliasing": args.aliasing,
        "out": args.out,
    }


def cmd_verify(args) -> dict:
    traj = io.read_tum(args.trajectory)
    candidates = io.read_candidates(args.candidates)
    config = VerifierConfig(threshold_tau=args.tau)
    if args.sequential:
        verdicts = verifier.replay_sequential(traj, candidates, config)
    else:
        verdicts = verifier.run_batch(traj, candidates, config)
    io.write_verdicts(args.out, verdicts)
    return {
        "trajectory": args.trajectory,
        "candidates": args.candidates,
        "tau": args.tau,
        "sequential": args.sequential,
        "out": args.out,
        "accepted": sum(1 for v in verdicts if v.accepted),
        "rejected": sum(1 for v in verdicts if not v.accepted),
    }


def _sweep_cell(shape, keyframes, spacing, floor_height, sigma, cell_seed, cand_spec):
    scenario = ScenarioSpec(
        shape=shape,
        keyframe_count=keyframes,
        keyframe_spacing=spacing,
        floor_height=floor_height,
        seed=cell_seed,
    )
    run = simulate.simulate_run(scenario, NoiseSpec(sigma), cand_spec)
    config = VerifierConfig(threshold_tau=math.inf)
    verdicts = verifier.run_batch(run.odometry, run.candidates, config)
    return _scored_labels(verdicts)


def cmd_sweep(args) -> dict:
    sigmas = [float(s) for s in args.sigmas.split(",") if s.strip()]
    if not sigmas:
        raise ValueError("at least one sigma is required")
    cand_spec = CandidateSpec(
        true_loop_radius=args.true_radius,
        false_loop_min_distance=args.false_min_distance,
        true_count=args.true_loops,
        false_count=args.false_loops,
        measurement_noise=NoiseSpec(args.measurement_sigma),
        aliasing=args.aliasing,
    )
    cells = [
        (si, sj, sigma, int(simulate.rng_for(args.seed, si, sj).integers(0, 2**62)))
        for si, sigma in enumerate(sigmas)
        for sj in range(args.seeds)
    ]
    workers = _sweep_workers(len(cells))

    def run_cell(cell):
        si, sj, sigma, cell_seed = cell
        return (si, sj), _sweep_cell(
            args.shape, args.keyframes, args.spacing, args.floor_height, sigma, cell_seed, cand_spec
        )

    results = {}
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            for key, items in pool.map(run_cell, cells):
                results[key] = items
    else:
        for cell in cells:
            key, items = run_cell(cell)
            results[key] = items

    os.makedirs(args.out, exist_ok=True)
    summary_rows = []
    svg_series = []
    table_lines = ["sigma    AP       MR       tau@100P"]
    for si, sigma in enumerate(sigmas):
        pooled = [item for sj in range(args.seeds) for item in results[(si, sj)]]
        curve = metrics.pr_curve(pooled)
        ap = metrics.average_precision(pooled)
        mr = metrics.max_recall_at_full_precision(pooled)
        full_precision = [pt for pt in curve if pt.precision == 1.0]
        tau_cal = max((-pt.threshold for pt in full_precision), default=None)
        pr_lines = ["score_threshold,precision,recall"]
        for pt in curve:
            pr_lines.append(f"{io.fmt(-pt.threshold)},{io.fmt(pt.precision)},{io.fmt(pt.recall)}")
        io.atomic_write_text(
            os.path.join(args.out, f"pr_sigma_{io.fmt(sigma)}.csv"), "\n".join(pr_lines) + "\n"
        )
        summary_rows.append(
            (
                io.fmt(sigma),
                metrics.as_percent(ap),
                metrics.as_percent(mr),
                "" if tau_cal is None else io.fmt(tau_cal),
            )
        )
        table_lines.append(
            f"{io.fmt(sigma):<8} {metrics.as_percent(ap):>6}   {metrics.as_percent(mr):>6}   "
            f"{'-' if tau_cal is None else io.fmt(tau_cal)}"
        )
        svg_series.append(
            (f"sigma={io.fmt(sigma)}", [(pt.recall, pt.precision) for pt in curve])
        )
    io.atomic_write_text(
        os.path.join(args.out, "summary.csv"),
        "sigma,ap_pct,mr_pct,tau_at_full_precision\n"
        + "".join(",".join(row) + "\n" for row in summary_rows),
    )
    io.atomic_write_text(os.path.join(args.out, "pr_curves.svg"), svgplot.pr_curve_svg(svg_series))
    print("\n".join(table_lines))
    return {
        "shape": args.shape,
        "keyframes": args.keyframes,
        "spacing": args.spacing,
        "sigmas": args.sigmas,
        "seeds": args.seeds,
        "true_loops": args.true_loops,
        "false_loops": args.false_loops,
        "workers": workers,
        "out": args.out,
    }


def cmd_eval(args) -> dict:
    if args.verdicts:
        rows = io.read_verdict_rows(args.verdicts)
        items = []
        for qid, mid, score, converged, accepted, label in rows:
            if label is None:
                raise ValueError(f"verdict row ({qid},{mid}) has no label")
            conf = -score if score is not None else -math.inf
            items.append(metrics.ScoredLabel(conf, label))
        ap = metrics.average_precision(items)
        mr = metrics.max_recall_at_full_precision(items)
        out_rows = [("AP", metrics.as_percent(ap)), ("MR", metrics.as_percent(mr))]
        io.write_metrics(args.out, out_rows)
        print(f"AP,{metrics.as_percent(ap)}")
        print(f"MR,{metrics.as_percent(mr)}")
        return {"verdicts": args.verdicts, "out": args.out}
    est = io.read_tum(args.est)
    gt = io.read_tum(args.gt)
    ate = metrics.ate_rmse(est, gt, args.align)
    prefix, tate = metrics.temporal_ate(est, gt, args.k, args.align)
    header = ["ate"] + [f"t{i}" for i in range(args.k)] + ["tATE"]
    values = [io.fmt(ate)] + [io.fmt(v) for v in prefix] + [io.fmt(tate)]
    io.atomic_write_text(args.out, ",".join(header) + "\n" + ",".join(values) + "\n")
    print(",".join(header))
    print(",".join(values))
    return {"est": args.est, "gt": args.gt, "k": args.k, "align": args.align, "out": args.out}


# ---------------------------------------------------------------------------
# argument wiring


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="loopgate",
        description="Gate pose-graph loop closures by how much they bend the trajectory.",
    )
    parser.add_argument("--version", action="version", version=f"loopgate {loopgate.__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="generate one synthetic scenario run directory")
    p.add_argument("--shape", choices=simulate.SHAPES, default="grid_loop")
    p.add_argument("--keyframes", type=int, default=200)
    p.add_argument("--spacing", type=float, default=0.5)
    p.add_argument("--floor-height", type=float, default=3.0)
    p.add_argument("--open-loop", action="store_true", help="suppress revisits")
    p.add_argument("--sigma", type=float, default=0.1)
    p.add_argument("--rot-ratio", type=float, default=0.1)
    p.add_argument("--measurement-sigma", type=float, default=0.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--true-loops", type=int, default=20)
    p.add_argument("--false-loops", type=int, default=20)
    p.add_argument("--true-radius", type=float, default=1.0)
    p.add_argument("--false-min-distance", type=float, default=10.0)
    p.add_argument("--aliasing", choices=("near_identity", "copy_true", "mixed"), default="near_identity")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_simulate, out_kind="dir")

    p = sub.add_parser("verify", help="score a candidates CSV against a TUM trajectory")
    p.add_argument("--trajectory", required=True)
    p.add_argument("--candidates", required=True)
    p.add_argument("--tau", type=float, required=True, help="acceptance threshold in meters")
    p.add_argument("--sequential", action="store_true", help="replay as a sequential session")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_verify, out_kind="file")

    p = sub.add_parser("sweep", help="simulate+verify over noise levels, emit PR report")
    p.add_argument("--sigmas", default="0.01,0.05,0.1,0.175")
    p.add_argument("--seeds", type=int, default=20)
    p.add_argument("--shape", choices=simulate.SHAPES, default="grid_loop")
    p.add_argument("--keyframes", type=int, default=200)
    p.add_argument("--spacing", type=float, default=0.5)
    p.add_argument("--floor-height", type=float, default=3.0)
    p.add_argument("--measurement-sigma", type=float, default=0.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--true-loops", type=int, default=20)
    p.add_argument("--false-loops", type=int, default=20)
    p.add_argument("--true-radius", type=float, default=1.0)
    p.add_argument("--false-min-distance", type=float, default=10.0)
    p.add_argument("--aliasing", choices=("near_identity", "copy_true", "mixed"), default="near_identity")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_sweep, out_kind="dir")

    p = sub.add_parser("eval", help="metrics from a verdict CSV or a trajectory pair")
    p.add_argument("--verdicts")
    p.add_argument("--est")
    p.add_argument("--gt")
    p.add_argument("--k", type=int, default=5)
    p.add_argument("--align", choices=metrics.ALIGNMENT_MODES, default="sim3")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_eval, out_kind="file")
    return parser


def _manifest_path(args) -> str:
    if args.out_kind == "dir":
        return os.path.join(args.out, "run_manifest.toml")
    return args.out + ".manifest.toml"


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "eval" and not args.verdicts and not (args.est and args.gt):
        print("error: eval needs --verdicts or both --est and --gt", file=sys.stderr)
        return 2
    started = time.perf_counter()
    entries = {
        "subcommand": args.command,
        "version": loopgate.__version__,
        "seed": getattr(args, "seed", 0),
    }
    try:
        entries.update(args.func(args))
        entries["status"] = "ok"
        code = 0
    except (ValueError, OSError) as e:
        message = " ".join(str(e).split())
        entries["status"] = "error"
        entries["error"] = message
        print(f"error: {message}", file=sys.stderr)
        code = 2
    entries["duration_s"] = round(time.perf_counter() - started, 6)
    try:
        if args.out_kind == "dir":
            os.makedirs(args.out, exist_ok=True)
        io.write_manifest(_manifest_path(args), entries)
    except OSError as e:
        print(f"error: cannot write manifest: {e}", file=sys.stderr)
        return 2
    return code


if __name__ == "__main__":
    sys.exit(main())
