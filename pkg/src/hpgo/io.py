"""Text formats: pose graphs, trajectories, scenario specs and reports.

Graph files are line oriented::

    VERTEX_SIM3 id tx ty tz rx ry rz s [timestamp segment]
    EDGE_SIM3 i j <7 measurement> <28 upper-triangular information>
    EDGE_SIM3_SCALEFREE i j <6 measurement> <21 upper-triangular information>
    FIX id

Trajectory files hold ``timestamp tx ty tz qx qy qz qw [s]`` per line.  Lines
starting with ``#`` are comments in every format.
"""

from __future__ import annotations

import json
import math
from pathlib import Path

import numpy as np
from scipy.spatial.transform import Rotation

from .eval import Trajectory
from .graph import EdgeKind, PoseGraph, SCALE
from .liegroup import Sim3
from .sim import CircleArc, NoiseSigmas, Polygon, ScenarioSpec

_TRIU7 = np.triu_indices(7)
_TRIU6 = np.triu_indices(6)


class FormatError(ValueError):
    """Malformed input; carries the 1-based line number and token position."""

    def __init__(self, message: str, line: int | None = None, token: int | None = None):
        where = ""
        if line is not None:
            where = f"line {line}"
            if token is not None:
                where += f", token {token}"
            where += ": "
        super().__init__(where + message)
        self.line = line
        self.token = token


def fmt(x: float) -> str:
    """Shortest text that parses back to the same double."""
    r = repr(float(x))
    return r[:-2] if r.endswith(".0") else r


def _floats(tokens, line, offset):
    out = []
    for k, tok in enumerate(tokens):
        try:
            v = float(tok)
        except ValueError:
            raise FormatError(f"not a number: {tok!r}", line, offset + k) from None
        if not math.isfinite(v):
            raise FormatError(f"non-finite value {tok!r}", line, offset + k)
        out.append(v)
    return out


def _int(tok, line, pos):
    try:
        v = int(tok)
    except ValueError:
        raise FormatError(f"not an integer: {tok!r}", line, pos) from None
    if v < 0:
        raise FormatError(f"negative id {tok!r}", line, pos)
    return v


def _records(text: str):
    for lineno, raw in enumerate(text.splitlines(), start=1):
        s = raw.strip()
        if s and not s.startswith("#"):
            yield lineno, s.split()


_EDGE_ARITY = {"EDGE_SIM3": (7, 28), "EDGE_SIM3_SCALEFREE": (6, 21)}


def parse_graph(text: str) -> PoseGraph:
    vertices: dict[int, tuple] = {}
    edges = []
    fixed = []
    for line, tok in _records(text):
        tag = tok[0]
        if tag == "VERTEX_SIM3":
            if len(tok) not in (9, 11):
                raise FormatError(f"VERTEX_SIM3 expects 8 or 10 fields, got {len(tok) - 1}", line)
            vid = _int(tok[1], line, 1)
            if vid in vertices:
                raise FormatError(f"duplicate vertex id {vid}", line, 1)
            theta = _floats(tok[2:9], line, 2)
            stamp, seg = None, 0
            if len(tok) == 11:
                stamp = _floats(tok[9:10], line, 9)[0]
                seg = _int(tok[10], line, 10)
            vertices[vid] = (theta, stamp, seg)
        elif tag in _EDGE_ARITY:
            nm, ni = _EDGE_ARITY[tag]
            if len(tok) != 3 + nm + ni:
                raise FormatError(f"{tag} expects {2 + nm + ni} fields, got {len(tok) - 1}", line)
            i, j = _int(tok[1], line, 1), _int(tok[2], line, 2)
            meas = _floats(tok[3:3 + nm], line, 3)
            tri = _floats(tok[3 + nm:], line, 3 + nm)
            edges.append((line, tag, i, j, meas, tri))
        elif tag == "FIX":
            if len(tok) != 2:
                raise FormatError("FIX expects one id", line)
            fixed.append((line, _int(tok[1], line, 1)))
        else:
            raise FormatError(f"unknown record {tag!r}", line, 0)

    n = len(vertices)
    if sorted(vertices) != list(range(n)):
        raise FormatError("vertex ids must be dense 0..N-1")
    graph = PoseGraph()
    for vid in range(n):
        theta, stamp, seg = vertices[vid]
        graph.add_node(theta, stamp, seg)
    for line, tag, i, j, meas, tri in edges:
        for pos, v in ((1, i), (2, j)):
            if v >= n:
                raise FormatError(f"edge references unknown vertex {v}", line, pos)
        if tag == "EDGE_SIM3":
            info = np.zeros((7, 7))
            info[_TRIU7] = tri
            kind = EdgeKind.REGULAR
            m = np.array(meas)
        else:
            info = np.zeros((7, 7))
            block = np.zeros((6, 6))
            block[_TRIU6] = tri
            info[:6, :6] = block
            kind = EdgeKind.SCALE_FREE
            m = np.append(meas, 0.0)
        info = np.triu(info) + np.triu(info, 1).T
        graph.add_edge(i, j, m, info, kind)
    for line, vid in fixed:
        if vid >= n:
            raise FormatError(f"FIX references unknown vertex {vid}", line, 1)
        graph.set_gauge(vid)
    return graph


def serialize_graph(graph: PoseGraph, header: str | None = None) -> str:
    lines = []
    if header:
        lines.extend(f"# {h}" for h in header.splitlines())
    for node in graph.nodes:
        fields = ["VERTEX_SIM3", str(node.id)] + [fmt(x) for x in node.theta]
        if node.timestamp is not None or node.segment != 0:
            stamp = node.timestamp if node.timestamp is not None else float("nan")
            if not math.isfinite(stamp):
                raise ValueError("vertices carrying a segment label need a timestamp")
            fields += [fmt(stamp), str(node.segment)]
        lines.append(" ".join(fields))
    for e in graph.edges:
        if e.scale_free:
            body = [fmt(x) for x in e.measurement[:SCALE]]
            body += [fmt(x) for x in e.information[:6, :6][_TRIU6]]
            tag = "EDGE_SIM3_SCALEFREE"
        else:
            body = [fmt(x) for x in e.measurement] + [fmt(x) for x in e.information[_TRIU7]]
            tag = "EDGE_SIM3"
        lines.append(" ".join([tag, str(e.i), str(e.j)] + body))
    for f in sorted(graph.fixed):
        lines.append(f"FIX {f}")
    return "\n".join(lines) + "\n"


def rotation_to_quaternion(R) -> np.ndarray:
    """``(qx, qy, qz, qw)`` with ``qw >= 0``."""
    q = Rotation.from_matrix(R).as_quat()
    if q[3] < 0:
        q = -q
    return q / np.linalg.norm(q)


def quaternion_to_rotation(q) -> np.ndarray:
    q = np.asarray(q, dtype=float)
    norm = np.linalg.norm(q)
    if not norm > 0:
        raise ValueError("zero quaternion")
    return Rotation.from_quat(q / norm).as_matrix()


def write_trajectory(traj: Trajectory, header: str | None = None) -> str:
    lines = []
    if header:
        lines.extend(f"# {h}" for h in header.splitlines())
    for stamp, pose in zip(traj.timestamps, traj.poses):
        q = rotation_to_quaternion(pose.R)
        vals = [stamp, *pose.t, *q, pose.s]
        lines.append(" ".join(fmt(v) for v in vals))
    return "\n".join(lines) + "\n"


def read_trajectory(text: str) -> Trajectory:
    stamps, poses = [], []
    for line, tok in _records(text):
        if len(tok) not in (8, 9):
            raise FormatError(f"expected 8 or 9 columns, got {len(tok)}", line)
        v = _floats(tok, line, 0)
        s = v[8] if len(v) == 9 else 0.0
        try:
            R = quaternion_to_rotation(v[4:8])
        except ValueError as exc:
            raise FormatError(str(exc), line, 4) from None
        stamps.append(v[0])
        poses.append(Sim3(R, v[1:4], s))
    try:
        return Trajectory(np.array(stamps), poses)
    except ValueError as exc:
        raise FormatError(str(exc)) from None


def trajectory_from_graph(graph: PoseGraph, timestamps=None) -> Trajectory:
    if timestamps is None:
        timestamps = [n.timestamp if n.timestamp is not None else float(n.id) for n in graph.nodes]
    segs = np.array([n.segment for n in graph.nodes])
    return Trajectory(np.asarray(timestamps, dtype=float), graph.poses(), segs)


def write_scenario(spec: ScenarioSpec) -> str:
    lines = [f"name = {spec.name}"]
    if isinstance(spec.shape, Polygon):
        lines += ["shape = polygon", f"turn_angle = {fmt(spec.shape.turn_angle)}",
                  f"segment_length = {fmt(spec.shape.segment_length)}"]
    else:
        lines += ["shape = circle", f"arc_fraction = {fmt(spec.shape.arc_fraction)}",
                  f"radius = {fmt(spec.shape.radius)}"]
    lines += [
        f"keyframes_per_segment = {spec.keyframes_per_segment}",
        "segment_scales = " + " ".join(fmt(c) for c in spec.segment_scales),
        f"dt = {fmt(spec.dt)}",
    ]
    if spec.noise is not None:
        lines += [f"noise_translation = {fmt(spec.noise.translation)}",
                  f"noise_rotation = {fmt(spec.noise.rotation)}",
                  f"noise_scale = {fmt(spec.noise.scale)}"]
    return "\n".join(lines) + "\n"


def read_scenario(text: str) -> ScenarioSpec:
    """Parse ``key = value`` lines.  ``turn_angle_deg`` may replace ``turn_angle``."""
    kv: dict[str, tuple[int, str]] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        s = raw.split("#", 1)[0].strip()
        if not s:
            continue
        if "=" not in s:
            raise FormatError("expected 'key = value'", lineno)
        key, value = (x.strip() for x in s.split("=", 1))
        kv[key] = (lineno, value)

    def get(key, conv=float, default=None):
        if key not in kv:
            if default is None:
                raise FormatError(f"missing key {key!r}")
            return default
        line, value = kv[key]
        try:
            return conv(value)
        except ValueError:
            raise FormatError(f"bad value for {key!r}: {value!r}", line) from None

    shape_name = get("shape", str)
    if shape_name == "polygon":
        if "turn_angle" in kv:
            turn = get("turn_angle")
        else:
            turn = np.deg2rad(get("turn_angle_deg"))
        shape = Polygon(turn, get("segment_length", float, 1.0))
    elif shape_name == "circle":
        shape = CircleArc(get("arc_fraction"), get("radius", float, 1.0))
    else:
        raise FormatError(f"unknown shape {shape_name!r}", kv["shape"][0])
    scales = get("segment_scales", lambda v: tuple(float(x) for x in v.replace(",", " ").split()))
    noise = None
    if any(k.startswith("noise_") for k in kv):
        noise = NoiseSigmas(get("noise_translation", float, 0.0), get("noise_rotation", float, 0.0),
                            get("noise_scale", float, 0.0))
    spec = ScenarioSpec(get("name", str, "custom"), shape, scales,
                        get("keyframes_per_segment", int, 20), noise, get("dt", float, 1.0))
    try:
        spec.validate()
    except ValueError as exc:
        raise FormatError(str(exc)) from None
    return spec


def dump_json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=False) + "\n"


def read_text(path) -> str:
    return Path(path).read_text(encoding="utf-8")


def write_text(path, text: str) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)
    return path


__all__ = [
    "FormatError", "fmt", "parse_graph", "serialize_graph", "read_trajectory",
    "write_trajectory", "trajectory_from_graph", "read_scenario", "write_scenario",
    "rotation_to_quaternion", "quaternion_to_rotation", "dump_json",
]
