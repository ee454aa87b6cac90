from __future__ import annotations

import numpy as np
import pytest
from hypothesis import settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from hpgo.liegroup import Sim3, exp_rotation

settings.register_profile("default", deadline=None, max_examples=100)
settings.load_profile("default")


def rotvec(max_angle: float = np.pi - 1e-3):
    """Rotation vectors with norm at most ``max_angle``."""

    def build(v, angle):
        n = np.linalg.norm(v)
        if n < 1e-9:
            return np.zeros(3)
        return v / n * angle

    directions = arrays(np.float64, 3, elements=st.floats(-1, 1))
    return st.builds(build, directions, st.floats(0.0, max_angle))


def theta7(max_angle: float = np.pi - 1e-3, span: float = 10.0):
    return st.builds(
        lambda t, phi, s: np.concatenate([t, phi, [s]]),
        arrays(np.float64, 3, elements=st.floats(-span, span)),
        rotvec(max_angle),
        st.floats(-2.0, 2.0),
    )


def sim3s(max_angle: float = np.pi - 1e-3):
    return st.builds(lambda th: Sim3(exp_rotation(th[3:6]), th[:3], th[6]), theta7(max_angle))


def random_theta(rng, max_angle=np.pi - 1e-3, span=10.0):
    axis = rng.normal(size=3)
    axis /= np.linalg.norm(axis)
    return np.concatenate([rng.uniform(-span, span, 3), axis * rng.uniform(0, max_angle),
                           [rng.uniform(-2, 2)]])


def random_sim3(rng, max_angle=np.pi - 1e-3):
    th = random_theta(rng, max_angle)
    return Sim3(exp_rotation(th[3:6]), th[:3], th[6])


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def graphs_equal(a, b) -> bool:
    """Structural equality: ids, poses, labels, edges, information and gauge, bit for bit."""
    if len(a.nodes) != len(b.nodes) or len(a.edges) != len(b.edges) or a.fixed != b.fixed:
        return False
    for x, y in zip(a.nodes, b.nodes):
        if (x.id, x.timestamp, x.segment) != (y.id, y.timestamp, y.segment):
            return False
        if not np.array_equal(x.theta, y.theta):
            return False
    for x, y in zip(a.edges, b.edges):
        if (x.i, x.j, x.kind) != (y.i, y.j, y.kind):
            return False
        if not (np.array_equal(x.measurement, y.measurement)
                and np.array_equal(x.information, y.information)):
            return False
    return True


def random_graph(rng, max_nodes=12, max_edges=20):
    import warnings

    from hpgo.graph import EdgeKind, PoseGraph, SelfLoopWarning

    g = PoseGraph()
    n = int(rng.integers(1, max_nodes + 1))
    stamped = bool(rng.integers(0, 2))
    for k in range(n):
        theta = rng.normal(scale=10.0 ** rng.integers(-3, 4), size=7)
        if stamped:
            g.add_node(theta, float(k) + rng.uniform(0, 0.5), int(rng.integers(0, 5)))
        else:
            g.add_node(theta)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", SelfLoopWarning)
        for _ in range(int(rng.integers(0, max_edges + 1))):
            i, j = (int(v) for v in rng.integers(0, n, 2))
            M = rng.normal(size=(7, 7))
            kind = EdgeKind.SCALE_FREE if rng.random() < 0.3 else EdgeKind.REGULAR
            info = M @ M.T
            g.add_edge(i, j, rng.normal(size=7), 0.5 * (info + info.T), kind)
    for f in rng.choice(n, size=int(rng.integers(0, min(n, 3) + 1)), replace=False):
        g.set_gauge(int(f))
    return g


def random_trajectory(rng, max_len=30):
    from hpgo.eval import Trajectory

    n = int(rng.integers(1, max_len + 1))
    stamps = np.cumsum(rng.uniform(1e-3, 2.0, n)) + rng.uniform(0, 1e9)
    return Trajectory(stamps, [random_sim3(rng) for _ in range(n)])
