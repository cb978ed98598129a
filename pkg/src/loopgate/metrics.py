"""Classification metrics over scored loop verdicts (PR curve, average
precision, maximum recall at full precision) and trajectory accuracy metrics
(ATE RMSE and its prefix-checkpoint variant)."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import List, Sequence, Tuple

import numpy as np

from loopgate import align
from loopgate.graph import Trajectory

ALIGNMENT_MODES = ("sim3", "se3")


@dataclass(frozen=True)
class ScoredLabel:
    """Verification outcome: higher confidence means more likely a true loop.
    Non-converged candidates carry confidence -inf so every threshold rejects
    them."""

    confidence: float
    label: bool

    def __post_init__(self):
        if math.isnan(self.confidence):
            raise ValueError("confidence must not be NaN")


@dataclass(frozen=True)
class PrPoint:
    threshold: float
    precision: float
    recall: float


def _validate(items: Sequence[ScoredLabel]) -> None:
    if not any(i.label for i in items):
        raise ValueError("need at least one positive label")
    if not any(not i.label for i in items):
        raise ValueError("need at least one negative label")


def pr_curve(items: Sequence[ScoredLabel]) -> List[PrPoint]:
    """One point per distinct confidence, sorted by decreasing confidence;
    ties enter the curve together."""
    _validate(items)
    conf = np.array([i.confidence for i in items])
    labels = np.array([i.label for i in items], dtype=bool)
    order = np.argsort(-conf, kind="stable")
    conf = conf[order]
    labels = labels[order]
    n_pos = int(labels.sum())
    tp = np.cumsum(labels)
    fp = np.cumsum(~labels)
    # index of the last item in each tie group
    last_of_group = np.nonzero(np.append(conf[1:] != conf[:-1], True))[0]
    points = []
    for idx in last_of_group:
        points.append(
            PrPoint(
                threshold=float(conf[idx]),
                precision=float(tp[idx] / (tp[idx] + fp[idx])),
                recall=float(tp[idx] / n_pos),
            )
        )
    return points


def average_precision(items: Sequence[ScoredLabel]) -> float:
    """Area under the PR curve by the step sum over curve points."""
    points = pr_curve(items)
    ap = 0.0
    prev_recall = 0.0
    for pt in points:
        ap += (pt.recall - prev_recall) * pt.precision
        prev_recall = pt.recall
    return ap


def max_recall_at_full_precision(items: Sequence[ScoredLabel]) -> float:
    """Largest recall among curve points with precision exactly 1; 0 if none."""
    points = pr_curve(items)
    return max((pt.recall for pt in points if pt.precision == 1.0), default=0.0)


def as_percent(value: float) -> str:
    """Fraction to the two-decimal percent string used in reports."""
    return f"{100.0 * value:.2f}"


# ---------------------------------------------------------------------------
# trajectory metrics


def _paired_translations(estimate: Trajectory, ground_truth: Trajectory):
    if len(estimate) != len(ground_truth):
        raise ValueError(
            f"trajectories must share the keyframe set, got {len(estimate)} vs {len(ground_truth)} points"
        )
    ts_e = estimate.timestamps()
    ts_g = ground_truth.timestamps()
    if not np.allclose(ts_e, ts_g, rtol=0, atol=1e-9):
        raise ValueError("trajectory timestamps do not match")
    return estimate.translations(), ground_truth.translations()


def ate_rmse(estimate: Trajectory, ground_truth: Trajectory, alignment: str = "sim3") -> float:
    """Post-alignment translational RMSE of the estimate against ground truth."""
    if alignment not in ALIGNMENT_MODES:
        raise ValueError(f"alignment must be one of {ALIGNMENT_MODES}, got {alignment!r}")
    est, gt = _paired_translations(estimate, ground_truth)
    pair = align.PointCloudPair(gt, est)
    return align.align(pair, with_scale=(alignment == "sim3")).rmse


def temporal_ate(
    estimate: Trajectory, ground_truth: Trajectory, k: int = 5, alignment: str = "sim3"
) -> Tuple[List[float], float]:
    """Prefix ATE at k evenly spaced checkpoints over the common time span,
    plus their root mean square. The last checkpoint covers the whole
    trajectory, so its entry equals the plain ATE."""
    if k < 1:
        raise ValueError("k must be >= 1")
    est, gt = _paired_translations(estimate, ground_truth)
    ts = ground_truth.timestamps()
    n = len(ts)
    span = ts[-1] - ts[0]
    prefix_ates = []
    for i in range(k):
        if i == k - 1:
            count = n
        else:
            checkpoint = ts[0] + (i + 1) * span / k
            count = int(np.searchsorted(ts, checkpoint + 1e-12, side="right"))
        if count < 3:
            raise ValueError(f"checkpoint {i} prefix has {count} points, need at least 3")
        pair = align.PointCloudPair(gt[:count], est[:count])
        prefix_ates.append(align.align(pair, with_scale=(alignment == "sim3")).rmse)
    tate = float(np.sqrt(np.mean(np.square(prefix_ates))))
    return prefix_ates, tate
