"""Independent reference implementations used only as test oracles. Each one
deliberately takes a different computational route than the production code:
4x4 homogeneous matrices instead of quaternions, Horn's eigenvector method
instead of the SVD solution, exhaustive enumeration instead of cumulative
sums."""

import numpy as np


def compose_via_matrices(a, b):
    """Pose composition as a plain 4x4 homogeneous matrix product."""
    return a.matrix() @ b.matrix()


def horn_similarity(p, q, with_scale=True):
    """Absolute orientation via Horn's quaternion eigenvector method plus the
    least-squares scale; returns (R, t, scale, rmse) mapping q onto p."""
    p = np.asarray(p, float)
    q = np.asarray(q, float)
    n = len(p)
    mp, mq = p.mean(0), q.mean(0)
    dp, dq = p - mp, q - mq
    S = dq.T @ dp
    A = S - S.T
    delta = np.array([A[1, 2], A[2, 0], A[0, 1]])
    N = np.zeros((4, 4))
    N[0, 0] = np.trace(S)
    N[0, 1:] = delta
    N[1:, 0] = delta
    N[1:, 1:] = S + S.T - np.trace(S) * np.eye(3)
    _, V = np.linalg.eigh(N)
    w, x, y, z = V[:, -1]
    R = np.array(
        [
            [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
            [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
            [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
        ]
    )
    scale = float(np.sum(dp * (dq @ R.T)) / np.sum(dq * dq)) if with_scale else 1.0
    t = mp - scale * (R @ mq)
    mapped = scale * (q @ R.T) + t
    rmse = float(np.sqrt(((p - mapped) ** 2).sum() / n))
    return R, t, scale, rmse


def ate_via_horn(est, gt, with_scale=True):
    """Trajectory ATE through the Horn route: align estimate onto ground truth."""
    return horn_similarity(gt, est, with_scale)[3]


def brute_pr_points(confidences, labels):
    """PR point per distinct threshold by explicit O(n^2) counting."""
    confidences = list(confidences)
    labels = list(labels)
    n_pos = sum(labels)
    points = []
    for thr in sorted(set(confidences), reverse=True):
        tp = sum(1 for c, y in zip(confidences, labels) if c >= thr and y)
        fp = sum(1 for c, y in zip(confidences, labels) if c >= thr and not y)
        points.append((thr, tp / (tp + fp), tp / n_pos))
    return points


def brute_average_precision(confidences, labels):
    points = brute_pr_points(confidences, labels)
    ap = 0.0
    prev_r = 0.0
    for _, precision, recall in points:
        ap += (recall - prev_r) * precision
        prev_r = recall
    return ap


def brute_max_recall_at_full_precision(confidences, labels):
    points = brute_pr_points(confidences, labels)
    return max((r for _, p, r in points if p == 1.0), default=0.0)


def finite_difference_jacobians(edge, x_from, x_to, h=1e-6):
    """Central differences of the edge residual wrt right-perturbations."""
    from loopgate import geometry as g
    from loopgate.solver import residual

    def r_of(xf, xt):
        return residual(edge, xf, xt).as_array()

    Jf = np.zeros((6, 6))
    Jt = np.zeros((6, 6))
    for k in range(6):
        d = np.zeros(6)
        d[k] = h
        plus = g.exp(g.Tangent6.from_array(d))
        minus = g.exp(g.Tangent6.from_array(-d))
        Jf[:, k] = (r_of(g.compose(x_from, plus), x_to) - r_of(g.compose(x_from, minus), x_to)) / (2 * h)
        Jt[:, k] = (r_of(x_from, g.compose(x_to, plus)) - r_of(x_from, g.compose(x_to, minus))) / (2 * h)
    return Jf, Jt
