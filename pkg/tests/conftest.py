import numpy as np
import pytest

from loopgate import backend


@pytest.fixture(scope="session", autouse=True)
def warm_kernels():
    # pay the jit compile before any timed assertion runs
    backend.warmup()


@pytest.fixture
def rng():
    return np.random.default_rng(20240814)


def random_pose(rng, trans_scale=2.0, max_angle=2.9):
    from loopgate import geometry as g

    q = rng.normal(size=4)
    p = g.Pose(q, rng.normal(0, trans_scale, 3))
    if p.rotation_angle() > max_angle:
        phi = g.quat_log(p.q)
        phi *= max_angle / np.linalg.norm(phi)
        p = g.Pose(g.quat_exp(phi), p.t)
    return p
