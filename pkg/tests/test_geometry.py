import numpy as np
import pytest

from loopgate import geometry as g
from loopgate.geometry import Pose, SimTransform, Tangent6

from conftest import random_pose
from oracles import compose_via_matrices


def test_identity_compose_neutral(rng):
    p = random_pose(rng)
    for out in (g.compose(Pose.identity(), p), g.compose(p, Pose.identity())):
        assert np.allclose(out.q, p.q, atol=1e-15)
        assert np.allclose(out.t, p.t, atol=1e-15)


def test_compose_inverse_is_identity(rng):
    for _ in range(50):
        p = random_pose(rng)
        ident = g.compose(p, g.inverse(p))
        assert ident.rotation_angle() < 1e-9
        assert np.linalg.norm(ident.t) < 1e-9


def test_compose_hand_example():
    a = Pose(g.quat_exp([0, 0, np.pi / 2]), [1, 0, 0])
    b = Pose([1, 0, 0, 0], [1, 0, 0])
    c = g.compose(a, b)
    assert np.allclose(c.t, [1, 1, 0], atol=1e-12)
    assert abs(c.rotation_angle() - np.pi / 2) < 1e-12


def test_compose_matches_matrix_product(rng):
    for _ in range(100):
        a, b = random_pose(rng), random_pose(rng)
        assert np.allclose(g.compose(a, b).matrix(), compose_via_matrices(a, b), atol=1e-12)


def test_compose_associative(rng):
    for _ in range(100):
        a, b, c = (random_pose(rng) for _ in range(3))
        left = g.compose(g.compose(a, b), c)
        right = g.compose(a, g.compose(b, c))
        assert np.allclose(left.matrix(), right.matrix(), atol=1e-9)


def test_quaternion_stays_normalized(rng):
    p = Pose(rng.normal(size=4) * 37.0, [0, 0, 0])
    assert abs(np.linalg.norm(p.q) - 1.0) < 1e-9
    for _ in range(500):
        p = g.compose(p, random_pose(rng))
    assert abs(np.linalg.norm(p.q) - 1.0) < 1e-9


def test_exp_zero_is_identity():
    p = g.exp(Tangent6.zero())
    assert np.allclose(p.q, [1, 0, 0, 0])
    assert np.allclose(p.t, 0)


def test_exp_pure_translation_exact():
    v = Tangent6([1, 2, 3], [0, 0, 0])
    back = g.log(g.exp(v))
    assert np.array_equal(back.rho, [1, 2, 3])
    assert np.array_equal(back.phi, [0, 0, 0])


def test_exp_log_roundtrip(rng):
    worst = 0.0
    for _ in range(1000):
        phi = rng.normal(0, 1.2, 3)
        n = np.linalg.norm(phi)
        if n > 3.0:
            phi *= 3.0 / n
        v = Tangent6(rng.normal(0, 2, 3), phi)
        err = np.abs(g.log(g.exp(v)).as_array() - v.as_array()).max()
        worst = max(worst, err)
    assert worst < 1e-8


def test_log_small_angles_stable(rng):
    for mag in (1e-12, 1e-9, 1e-7, 1e-5):
        v = Tangent6([0.3, -0.1, 0.2], rng.normal(0, mag, 3))
        assert np.abs(g.log(g.exp(v)).as_array() - v.as_array()).max() < 1e-10


def test_log_at_pi_raises():
    p = Pose(g.quat_exp([0, 0, np.pi]), [0, 0, 0])
    with pytest.raises(g.BranchAmbiguityError):
        g.log(p)


def test_apply_sim_examples():
    assert np.allclose(g.apply_sim(SimTransform.identity(), [1, 2, 3]), [1, 2, 3])
    s = SimTransform([1, 0, 0, 0], [0, 0, 0], 2.0)
    assert np.allclose(g.apply_sim(s, [1, 0, 0]), [2, 0, 0])
    s = SimTransform(g.quat_exp([0, 0, np.pi / 2]), [1, 1, 1], 2.0)
    assert np.allclose(g.apply_sim(s, [1, 0, 0]), [1, 3, 1], atol=1e-12)


def test_sim_compose_consistent_with_apply(rng):
    for _ in range(100):
        s1 = SimTransform(rng.normal(size=4), rng.normal(size=3), float(np.exp(rng.normal())))
        s2 = SimTransform(rng.normal(size=4), rng.normal(size=3), float(np.exp(rng.normal())))
        p = rng.normal(size=3)
        via_compose = g.apply_sim(g.compose_sim(s1, s2), p)
        via_nesting = g.apply_sim(s1, g.apply_sim(s2, p))
        assert np.allclose(via_compose, via_nesting, atol=1e-9)


def test_sim_inverse_roundtrip(rng):
    for _ in range(50):
        s = SimTransform(rng.normal(size=4), rng.normal(size=3), float(np.exp(rng.normal())))
        p = rng.normal(size=3)
        assert np.allclose(g.apply_sim(g.inverse_sim(s), g.apply_sim(s, p)), p, atol=1e-9)


def test_sim_scale_must_be_positive():
    with pytest.raises(ValueError):
        SimTransform([1, 0, 0, 0], [0, 0, 0], 0.0)
    with pytest.raises(ValueError):
        SimTransform([1, 0, 0, 0], [0, 0, 0], -2.0)


def test_mat_quat_roundtrip_includes_pi(rng):
    for _ in range(200):
        q = g._unit_quat(rng.normal(size=4))
        q2 = g.mat_to_quat(g.quat_to_mat(q))
        assert min(np.abs(q - q2).max(), np.abs(q + q2).max()) < 1e-12
    # exactly-pi rotations convert fine, only log refuses them
    for axis in np.eye(3):
        q = g.quat_exp(np.pi * axis)
        R = g.quat_to_mat(q)
        assert np.allclose(g.quat_to_mat(g.mat_to_quat(R)), R, atol=1e-12)
