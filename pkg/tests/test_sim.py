import numpy as np
import pytest

from hpgo.eval import evaluate
from hpgo.io import trajectory_from_graph
from hpgo.liegroup import compose, inverse, log_rotation, t2v
from hpgo.sim import (
    PRESETS,
    CircleArc,
    NoiseSigmas,
    Polygon,
    ScenarioSpec,
    generate,
    perturb,
    preset,
)
from hpgo.solver import optimize


def graph_arrays(graph):
    return (graph.thetas, [e.measurement for e in graph.edges],
            [e.information for e in graph.edges])


def assert_graphs_identical(a, b):
    ta, ma, ia = graph_arrays(a)
    tb, mb, ib = graph_arrays(b)
    assert np.array_equal(ta, tb)
    assert all(np.array_equal(x, y) for x, y in zip(ma, mb))
    assert all(np.array_equal(x, y) for x, y in zip(ia, ib))


class TestPresets:
    def test_triangle(self):
        spec = preset("triangle")
        assert spec.segment_scales == (1, 0.5, 2, 0.3)
        assert spec.keyframes_per_segment == 20
        assert spec.shape.turn_angle == pytest.approx(np.deg2rad(120))

    def test_rectangle(self):
        spec = preset("rectangle")
        assert spec.segment_scales == (1, 0.5, 2, 0.2, 0.8)
        assert spec.shape.turn_angle == pytest.approx(np.pi / 2)

    def test_circles(self):
        assert preset("circle4").segments == 4
        assert preset("circle4").shape.arc_fraction == pytest.approx(1 / 3)
        assert preset("circle5").segments == 5
        assert preset("circle5").shape.arc_fraction == pytest.approx(1 / 4)

    def test_unknown(self):
        with pytest.raises(ValueError):
            preset("hexagon")

    @pytest.mark.parametrize("name,nodes", [("triangle", 80), ("circle4", 80),
                                            ("rectangle", 100), ("circle5", 100)])
    def test_node_counts(self, name, nodes):
        out = generate(preset(name))
        assert len(out.graph.nodes) == nodes
        kinds = [e.scale_free for e in out.graph.edges]
        assert sum(kinds) == preset(name).segments - 1
        assert len(out.graph.edges) == nodes  # chain of n-1 plus one loop closure


class TestGeometry:
    @pytest.mark.parametrize("name", PRESETS)
    def test_loop_closes_exactly(self, name):
        out = generate(preset(name))
        first, last = out.loop_closure
        gt = out.ground_truth.poses
        rel = compose(inverse(gt[first]), gt[last])
        assert np.max(np.abs(t2v(rel))) < 1e-9

    @pytest.mark.parametrize("name", PRESETS)
    def test_loop_edge_scale(self, name):
        out = generate(preset(name))
        spec = out.spec
        loop = out.graph.edges[-1]
        assert (loop.i, loop.j) == out.loop_closure
        expected = np.log(spec.segment_scales[0] / spec.segment_scales[-1])
        assert loop.measurement[6] == pytest.approx(expected, abs=1e-15)
        assert not loop.scale_free

    @pytest.mark.parametrize("name", PRESETS)
    def test_boundary_edges_pure_rotation(self, name):
        out = generate(preset(name))
        spec = out.spec
        for e in out.graph.edges:
            if not e.scale_free:
                continue
            assert np.all(e.measurement[:3] == 0) and e.measurement[6] == 0
            gt = out.ground_truth.poses
            R = gt[e.i].R.T @ gt[e.j].R
            assert np.allclose(e.measurement[3:6], log_rotation(R), atol=1e-12)
            if isinstance(spec.shape, Polygon):
                assert np.linalg.norm(e.measurement[3:6]) == pytest.approx(
                    min(spec.shape.turn_angle, 2 * np.pi - spec.shape.turn_angle))

    @pytest.mark.parametrize("name", PRESETS)
    def test_concatenation_carries_segment_scales(self, name):
        out = generate(preset(name))
        est = out.graph.positions()
        gt = out.ground_truth.positions
        labels = out.ground_truth.segments
        for m, c in enumerate(out.spec.segment_scales):
            idx = np.flatnonzero(labels == m)
            d_est = np.linalg.norm(np.diff(est[idx], axis=0), axis=1)
            d_gt = np.linalg.norm(np.diff(gt[idx], axis=0), axis=1)
            assert np.max(np.abs(d_est / d_gt - c)) < 1e-12 * max(1.0, c)

    def test_planar(self):
        for name in PRESETS:
            assert np.max(np.abs(generate(preset(name)).ground_truth.positions[:, 1])) == 0.0

    def test_critical_positions(self):
        out = generate(preset("triangle"))
        side = preset("triangle").shape.segment_length
        P = out.critical_positions
        assert P.shape == (3, 3)
        sides = [np.linalg.norm(P[k] - P[(k + 1) % 3]) for k in range(3)]
        assert np.allclose(sides, side, rtol=1e-12)


class TestSpecValidation:
    def test_needs_loop(self):
        spec = ScenarioSpec("bad", Polygon(np.deg2rad(100), 1.0), (1, 1, 1, 1))
        with pytest.raises(ValueError):
            generate(spec)

    def test_scales_positive(self):
        with pytest.raises(ValueError):
            ScenarioSpec("bad", Polygon(np.deg2rad(120)), (1, -1, 1, 1)).validate()

    def test_keyframes(self):
        with pytest.raises(ValueError):
            ScenarioSpec("bad", Polygon(np.deg2rad(120)), (1, 1, 1, 1), 1).validate()

    def test_custom_hexagon(self):
        spec = ScenarioSpec("hex", Polygon(np.deg2rad(60), 2.0), (1, 2, 0.5, 1, 3, 0.7, 1.5), 5)
        out = generate(spec)
        assert len(out.graph.nodes) == 35
        assert out.graph.validate() == []

    def test_custom_circle(self):
        spec = ScenarioSpec("c3", CircleArc(0.5, 2.0), (1, 0.4, 2), 10)
        assert generate(spec).graph.validate() == []


class TestNoise:
    def test_zero_sigmas_identical(self):
        out = generate(preset("triangle"))
        noisy = perturb(out, NoiseSigmas(), seed=3)
        assert_graphs_identical(out.graph, noisy.graph)
        assert noisy.graph is not out.graph

    def test_deterministic(self):
        spec = preset("rectangle")
        a = generate(spec, seed=1)
        b = generate(spec, seed=1)
        assert_graphs_identical(a.graph, b.graph)
        s = NoiseSigmas(0.01, 0.01, 0.01)
        assert_graphs_identical(perturb(a, s, 7).graph, perturb(b, s, 7).graph)

    def test_seed_changes_noise(self):
        out = generate(preset("triangle"))
        s = NoiseSigmas(0.01, 0.0, 0.0)
        a, b = perturb(out, s, 1).graph, perturb(out, s, 2).graph
        assert not np.array_equal(a.thetas, b.thetas)

    def test_only_regular_edges_perturbed(self):
        out = generate(preset("triangle"))
        noisy = perturb(out, NoiseSigmas(0.05, 0.05, 0.05), 0)
        for e0, e1 in zip(out.graph.edges, noisy.graph.edges):
            if e0.scale_free:
                assert np.array_equal(e0.measurement, e1.measurement)
            else:
                assert not np.array_equal(e0.measurement, e1.measurement)

    def test_spec_noise_applied(self):
        spec = ScenarioSpec("n", Polygon(np.deg2rad(120), 4.0), (1, 0.5, 2, 0.3),
                            noise=NoiseSigmas(0.01))
        a = generate(spec, seed=4)
        b = perturb(generate(preset("triangle")), NoiseSigmas(0.01), 4)
        assert np.array_equal(a.graph.thetas, b.graph.thetas)

    @pytest.mark.slow
    def test_hpgo_error_grows_with_noise(self):
        base = generate(preset("triangle"))
        means = []
        for sigma in (0.003, 0.01, 0.03):
            vals = []
            for seed in range(5):
                out = perturb(base, NoiseSigmas(sigma), seed)
                optimize(out.graph)
                vals.append(evaluate(trajectory_from_graph(out.graph), out.ground_truth).rmse)
            means.append(np.mean(vals))
        assert means[0] < means[1] < means[2]


class TestRecovery:
    @pytest.mark.parametrize("name", ["triangle", "circle4"])
    def test_hpgo_recovers_ground_truth(self, name):
        out = generate(preset(name))
        optimize(out.graph)
        stats = evaluate(trajectory_from_graph(out.graph), out.ground_truth)
        assert stats.rmse < 1e-6
