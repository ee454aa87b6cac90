import warnings

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from hpgo.graph import EdgeKind, PoseGraph, SelfLoopWarning
from hpgo.liegroup import Sim3, compose, exp_rotation, inverse, t2v, v2t
from hpgo.sim import generate, preset

from .conftest import random_theta


def codes(graph):
    return [f.code for f in graph.validate()]


def union_find_sizes(n, pairs):
    parent = list(range(n))

    def find(a):
        while parent[a] != a:
            a = parent[a]
        return a

    for a, b in pairs:
        parent[find(a)] = find(b)
    counts = {}
    for k in range(n):
        counts[find(k)] = counts.get(find(k), 0) + 1
    return sorted(counts.values(), reverse=True)


class TestConstruction:
    def test_first_id_is_zero(self):
        assert PoseGraph().add_node() == 0

    def test_ids_dense(self):
        g = PoseGraph()
        assert [g.add_node(), g.add_node()] == [0, 1]

    def test_id_after_load(self):
        out = generate(preset("triangle"))
        assert out.graph.add_node() == len(out.graph.nodes) - 1 == 80

    def test_edge_index(self):
        g = PoseGraph()
        g.add_node(), g.add_node()
        assert g.add_edge(0, 1, np.zeros(7)) == 0
        assert g.add_edge(1, 0, np.zeros(7)) == 1

    def test_self_loop_warns(self):
        g = PoseGraph()
        g.add_node()
        with pytest.warns(SelfLoopWarning):
            g.add_edge(0, 0, np.zeros(7))
        assert g.edges[0].self_loop

    def test_unknown_id(self):
        g = PoseGraph()
        g.add_node()
        with pytest.raises(KeyError):
            g.add_edge(0, 1, np.zeros(7))
        with pytest.raises(KeyError):
            g.set_gauge(3)

    def test_default_information(self):
        g = PoseGraph()
        g.add_node(), g.add_node()
        g.add_edge(0, 1, np.zeros(7))
        g.add_edge(0, 1, np.ones(7), kind=EdgeKind.SCALE_FREE)
        assert np.array_equal(g.edges[0].information, np.eye(7))
        sf = g.edges[1]
        assert sf.measurement[6] == 0.0
        assert np.all(sf.information[6] == 0) and np.all(sf.information[:, 6] == 0)
        assert np.array_equal(sf.information[:6, :6], np.eye(6))


class TestValidate:
    def healthy(self):
        g = PoseGraph()
        for _ in range(3):
            g.add_node()
        g.add_edge(0, 1, np.zeros(7))
        g.add_edge(1, 2, np.zeros(7))
        g.set_gauge(0)
        return g

    def test_healthy(self):
        assert self.healthy().validate() == []

    def test_simulations_validate(self):
        for name in ("triangle", "rectangle", "circle4", "circle5"):
            assert generate(preset(name)).graph.validate() == []

    def test_gauge_free(self):
        g = self.healthy()
        g.fixed.clear()
        assert codes(g) == ["gauge-free"]

    def test_non_psd(self):
        g = self.healthy()
        g.edges[0].information = -np.eye(7)
        assert codes(g) == ["non-psd-information"]

    def test_asymmetric(self):
        g = self.healthy()
        info = np.eye(7)
        info[0, 1] = 0.5
        g.edges[0].information = info
        assert codes(g) == ["asymmetric-information"]

    def test_dangling(self):
        g = self.healthy()
        g.edges[0].j = 7
        g.fixed.add(9)
        assert codes(g) == ["dangling-edge", "dangling-fix"]

    def test_non_finite(self):
        g = self.healthy()
        g.nodes[1].theta = np.full(7, np.nan)
        assert "non-finite-pose" in codes(g)

    @given(st.integers(2, 25), st.lists(st.tuples(st.integers(0, 24), st.integers(0, 24)),
                                        max_size=30))
    def test_component_sizes_match_union_find(self, n, pairs):
        pairs = [(a % n, b % n) for a, b in pairs]
        g = PoseGraph()
        for _ in range(n):
            g.add_node()
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", SelfLoopWarning)
            for a, b in pairs:
                g.add_edge(a, b, np.zeros(7))
        g.set_gauge(0)
        expected = union_find_sizes(n, pairs)
        found = [f for f in g.validate() if f.code == "disconnected"]
        if len(expected) == 1:
            assert found == []
        else:
            assert found[0].data["sizes"] == expected


class TestConcatenation:
    def test_two_nodes(self):
        g = PoseGraph()
        g.add_node(), g.add_node()
        g.add_edge(0, 1, [1, 0, 0, 0, 0, 0, 0])
        g.initialize_by_concatenation()
        assert np.array_equal(g.nodes[1].theta[:3], [1, 0, 0])

    def test_scale_free_keeps_scale(self):
        g = PoseGraph()
        for _ in range(4):
            g.add_node()
        a = np.array([1.0, 0, 0, 0, 0.3, 0, np.log(2)])
        b = np.array([0.0, 0, 0, 0, 0.5, 0, 0])
        c = np.array([0.0, 2, 0, 0.1, 0, 0, 0])
        g.add_edge(0, 1, a)
        g.add_edge(1, 2, b, kind=EdgeKind.SCALE_FREE)
        g.add_edge(3, 2, c)  # inverted orientation
        g.initialize_by_concatenation()
        manual = [Sim3.identity()]
        manual.append(compose(manual[-1], v2t(a)))
        manual.append(compose(manual[-1], v2t(b)))
        manual.append(compose(manual[-1], inverse(v2t(c))))
        for node, T in zip(g.nodes, manual):
            assert np.allclose(node.theta, t2v(T), atol=1e-12)
        assert g.nodes[2].theta[6] == pytest.approx(np.log(2))

    def test_missing_link(self):
        g = PoseGraph()
        for _ in range(3):
            g.add_node()
        g.add_edge(0, 1, np.zeros(7))
        with pytest.raises(ValueError):
            g.initialize_by_concatenation()

    def test_single_scale_reproduces_ground_truth(self, rng):
        truth = [v2t(random_theta(rng, span=3.0)) for _ in range(30)]
        truth = [Sim3(T.R, T.t, 0.0) for T in truth]
        g = PoseGraph()
        for _ in truth:
            g.add_node()
        for k in range(len(truth) - 1):
            g.add_edge(k, k + 1, t2v(compose(inverse(truth[k]), truth[k + 1])))
        g.initialize_by_concatenation()
        gauge = truth[0]
        for node, T in zip(g.nodes, truth):
            assert np.max(np.abs(compose(gauge, v2t(node.theta)).matrix() - T.matrix())) < 1e-9


class TestMeasurementConvention:
    @pytest.mark.parametrize("name", ["triangle", "rectangle", "circle4", "circle5"])
    def test_regular_edges_consistent(self, name):
        out = generate(preset(name))
        th = out.consistent_thetas
        for e in out.graph.edges:
            if e.scale_free:
                continue
            rel = t2v(compose(inverse(v2t(th[e.i])), v2t(th[e.j])))
            assert np.max(np.abs(rel - e.measurement)) < 1e-10


class TestCopy:
    def test_deep(self):
        g = PoseGraph()
        g.add_node(), g.add_node()
        g.add_edge(0, 1, np.zeros(7))
        h = g.copy()
        h.nodes[1].theta[0] = 5.0
        h.edges[0].measurement[0] = 5.0
        assert g.nodes[1].theta[0] == 0.0 and g.edges[0].measurement[0] == 0.0

    def test_thetas_setter(self):
        g = PoseGraph()
        g.add_node(), g.add_node()
        g.thetas = np.arange(14.0).reshape(2, 7)
        assert np.array_equal(g.nodes[1].theta, np.arange(7.0, 14.0))
        assert np.array_equal(g.positions()[1], [7, 8, 9])
        assert np.allclose(g.poses()[0].R, exp_rotation([3, 4, 5]))
