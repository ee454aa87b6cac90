"""Segmented planar trajectories with scale jumps at every re-initialization.

The camera looks along its z axis and turns about its y axis, so the
trajectories live in the world x-z plane.  Each segment is observed at its
own scale; consecutive segments are joined by a scale-free pure-rotation
edge, and the last keyframe closes the loop onto the end of the first
segment with a regular (scale-aware) edge.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .eval import Trajectory
from .graph import EdgeKind, PoseGraph
from .liegroup import Sim3, compose, exp_rotation, inverse, log_rotation, t2v

LOOP_TOL = 1e-9


@dataclass(frozen=True)
class Polygon:
    """Straight segments with an in-place turn of ``turn_angle`` radians between them."""

    turn_angle: float
    segment_length: float = 1.0


@dataclass(frozen=True)
class CircleArc:
    """Each segment covers ``arc_fraction`` of a circle of the given radius."""

    arc_fraction: float
    radius: float = 1.0


@dataclass(frozen=True)
class NoiseSigmas:
    translation: float = 0.0
    rotation: float = 0.0
    scale: float = 0.0

    @property
    def zero(self) -> bool:
        return self.translation == 0 and self.rotation == 0 and self.scale == 0


@dataclass(frozen=True)
class ScenarioSpec:
    name: str
    shape: Polygon | CircleArc
    segment_scales: tuple[float, ...]
    keyframes_per_segment: int = 20
    noise: NoiseSigmas | None = None
    dt: float = 1.0

    @property
    def segments(self) -> int:
        return len(self.segment_scales)

    def validate(self) -> None:
        if self.segments < 2:
            raise ValueError("a scenario needs at least two segments")
        if self.keyframes_per_segment < 2:
            raise ValueError("keyframes_per_segment must be >= 2")
        if any(not c > 0 for c in self.segment_scales):
            raise ValueError("segment scales must be positive")
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if isinstance(self.shape, Polygon):
            total = self.shape.turn_angle * (self.segments - 1)
            if self.shape.segment_length <= 0:
                raise ValueError("segment_length must be positive")
        elif isinstance(self.shape, CircleArc):
            total = 2 * np.pi * self.shape.arc_fraction * (self.segments - 1)
            if self.shape.radius <= 0 or not 0 < self.shape.arc_fraction < 1:
                raise ValueError("radius must be positive and arc_fraction in (0, 1)")
        else:
            raise ValueError(f"unknown shape {self.shape!r}")
        if abs(np.remainder(total + np.pi, 2 * np.pi) - np.pi) > 1e-9:
            raise ValueError("the last segment does not retrace the first one: no loop closure")


@dataclass
class SimulationOutput:
    spec: ScenarioSpec
    ground_truth: Trajectory
    graph: PoseGraph
    consistent_thetas: np.ndarray
    critical_positions: np.ndarray
    loop_closure: tuple[int, int] = field(default=(0, 0))


TRIANGLE_SCALES = (1.0, 0.5, 2.0, 0.3)
RECTANGLE_SCALES = (1.0, 0.5, 2.0, 0.2, 0.8)

# Spans set so that the un-optimized (concatenated) trajectories reproduce the
# published drift magnitudes; the circle radii also absorb the unknown scales.
TRIANGLE_SIDE = 4.0
RECTANGLE_SIDE = 4.0
CIRCLE4_RADIUS = 3.26
CIRCLE5_RADIUS = 4.63

PRESETS = ("triangle", "rectangle", "circle4", "circle5")


def preset(name: str) -> ScenarioSpec:
    if name == "triangle":
        return ScenarioSpec(name, Polygon(np.deg2rad(120.0), TRIANGLE_SIDE), TRIANGLE_SCALES)
    if name == "rectangle":
        return ScenarioSpec(name, Polygon(np.deg2rad(90.0), RECTANGLE_SIDE), RECTANGLE_SCALES)
    if name == "circle4":
        return ScenarioSpec(name, CircleArc(1.0 / 3.0, CIRCLE4_RADIUS), TRIANGLE_SCALES)
    if name == "circle5":
        return ScenarioSpec(name, CircleArc(1.0 / 4.0, CIRCLE5_RADIUS), RECTANGLE_SCALES)
    raise ValueError(f"unknown preset {name!r}; choose from {', '.join(PRESETS)}")


def _heading(psi: float) -> np.ndarray:
    return np.array([np.sin(psi), 0.0, np.cos(psi)])


def _yaw(psi: float) -> np.ndarray:
    return exp_rotation([0.0, psi, 0.0])


def ground_truth_poses(spec: ScenarioSpec) -> tuple[list[Sim3], list[int]]:
    """Metric keyframe poses and their segment labels."""
    K = spec.keyframes_per_segment
    u = np.arange(K) / (K - 1)
    poses, labels = [], []
    shape = spec.shape
    start = np.zeros(3)
    for m in range(spec.segments):
        if isinstance(shape, Polygon):
            psi = m * shape.turn_angle
            for uk in u:
                poses.append(Sim3(_yaw(psi), start + uk * shape.segment_length * _heading(psi)))
            start = start + shape.segment_length * _heading(psi)
        else:
            arc = 2 * np.pi * shape.arc_fraction
            for uk in u:
                psi = (m + uk) * arc
                p = shape.radius * np.array([1.0 - np.cos(psi), 0.0, np.sin(psi)])
                poses.append(Sim3(_yaw(psi), p))
        labels.extend([m] * K)
    return poses, labels


def generate(spec: ScenarioSpec, seed: int = 0) -> SimulationOutput:
    """Build ground truth and the measured pose graph for a scenario.

    The graph's vertices hold the concatenated (un-optimized) estimate and
    node 0 is fixed.  ``consistent_thetas`` are the Sim(3) poses that satisfy
    every measurement exactly: ground-truth positions with log-scale
    ``-ln(scale)`` of the owning segment.
    """
    spec.validate()
    K = spec.keyframes_per_segment
    poses, labels = ground_truth_poses(spec)
    n = len(poses)
    scales = np.array(spec.segment_scales)[labels]

    gt = Trajectory(np.arange(n) * spec.dt, poses, np.array(labels))
    consistent = np.stack([t2v(Sim3(p.R, p.t, -np.log(c))) for p, c in zip(poses, scales)])

    graph = PoseGraph()
    for k in range(n):
        graph.add_node(None, timestamp=k * spec.dt, segment=labels[k])
    for k in range(n - 1):
        rel = compose(inverse(poses[k]), poses[k + 1])
        if labels[k] == labels[k + 1]:
            meas = t2v(Sim3(rel.R, scales[k] * rel.t, 0.0))
            graph.add_edge(k, k + 1, meas, kind=EdgeKind.REGULAR)
        else:
            meas = np.zeros(7)
            meas[3:6] = log_rotation(rel.R)
            graph.add_edge(k, k + 1, meas, kind=EdgeKind.SCALE_FREE)

    # the last segment retraces the first: its final keyframe sits on node K-1
    first, last = K - 1, n - 1
    rel = compose(inverse(poses[first]), poses[last])
    if np.linalg.norm(t2v(rel)[:6]) > LOOP_TOL:
        raise ValueError("loop does not close")
    meas = t2v(Sim3(rel.R, scales[first] * rel.t, np.log(scales[first] / scales[last])))
    graph.add_edge(first, last, meas, kind=EdgeKind.REGULAR)
    graph.set_gauge(0)
    graph.initialize_by_concatenation()

    corners = [poses[m * K - 1].t for m in range(1, spec.segments)]
    out = SimulationOutput(spec, gt, graph, consistent, np.array(corners), (first, last))
    if spec.noise is not None and not spec.noise.zero:
        out = perturb(out, spec.noise, seed)
    return out


def perturb(output: SimulationOutput, sigmas: NoiseSigmas, seed: int = 0) -> SimulationOutput:
    """Gaussian noise on every regular edge measurement; vertices re-initialized.

    Rotation noise is applied on the right in the tangent space.
    """
    if sigmas.zero:
        return replace(output, graph=output.graph.copy())
    rng = np.random.default_rng(seed)
    graph = output.graph.copy()
    for e in graph.edges:
        if e.scale_free:
            continue
        dt = rng.normal(0.0, sigmas.translation, 3) if sigmas.translation else None
        dr = rng.normal(0.0, sigmas.rotation, 3) if sigmas.rotation else None
        ds = rng.normal(0.0, sigmas.scale) if sigmas.scale else None
        meas = e.measurement.copy()
        if dt is not None:
            meas[:3] += dt
        if dr is not None:
            meas[3:6] = log_rotation(exp_rotation(meas[3:6]) @ exp_rotation(dr))
        if ds is not None:
            meas[6] += ds
        e.measurement = meas
    graph.initialize_by_concatenation()
    return replace(output, graph=graph)
