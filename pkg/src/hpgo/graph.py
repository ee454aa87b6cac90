"""Pose graph data model."""

from __future__ import annotations

import copy
import enum
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from .liegroup import Sim3, canonical_rotvec, compose, t2v, v2t

SCALE = 6  # index of the log-scale slot in a minimal vector


class EdgeKind(enum.Enum):
    REGULAR = "regular"
    SCALE_FREE = "scalefree"


class SelfLoopWarning(UserWarning):
    pass


@dataclass
class PoseNode:
    id: int
    theta: np.ndarray
    timestamp: float | None = None
    segment: int = 0


@dataclass
class Edge:
    """Relative pose measurement of node ``j`` expressed in the frame of ``i``."""

    i: int
    j: int
    measurement: np.ndarray
    information: np.ndarray
    kind: EdgeKind = EdgeKind.REGULAR

    @property
    def scale_free(self) -> bool:
        return self.kind is EdgeKind.SCALE_FREE

    @property
    def self_loop(self) -> bool:
        return self.i == self.j


@dataclass
class Finding:
    code: str
    message: str
    data: dict = field(default_factory=dict)


def default_information(kind: EdgeKind = EdgeKind.REGULAR) -> np.ndarray:
    info = np.eye(7)
    if kind is EdgeKind.SCALE_FREE:
        info[SCALE, SCALE] = 0.0
    return info


@dataclass
class PoseGraph:
    nodes: list[PoseNode] = field(default_factory=list)
    edges: list[Edge] = field(default_factory=list)
    fixed: set[int] = field(default_factory=set)

    def __len__(self) -> int:
        return len(self.nodes)

    def add_node(self, pose=None, timestamp: float | None = None, segment: int = 0) -> int:
        theta = np.zeros(7) if pose is None else np.array(pose, dtype=float).reshape(7)
        node_id = len(self.nodes)
        self.nodes.append(PoseNode(node_id, theta, timestamp, int(segment)))
        return node_id

    def add_edge(self, i: int, j: int, measurement, information=None,
                 kind: EdgeKind = EdgeKind.REGULAR) -> int:
        """Append an edge and return its index.

        For scale-free edges the log-scale slot of the measurement and the
        scale row/column of the information matrix are zeroed; they carry no
        meaning for those edges.

        Raises:
            KeyError: if ``i`` or ``j`` is not a node of the graph.
        """
        for n in (i, j):
            if not 0 <= n < len(self.nodes):
                raise KeyError(f"unknown node id {n}")
        meas = np.array(measurement, dtype=float).reshape(7)
        info = default_information(kind) if information is None else (
            np.array(information, dtype=float).reshape(7, 7))
        if kind is EdgeKind.SCALE_FREE:
            meas[SCALE] = 0.0
            info[SCALE, :] = 0.0
            info[:, SCALE] = 0.0
        if i == j:
            warnings.warn(f"self-loop edge on node {i}", SelfLoopWarning, stacklevel=2)
        self.edges.append(Edge(int(i), int(j), meas, info, kind))
        return len(self.edges) - 1

    def set_gauge(self, node: int) -> None:
        if not 0 <= node < len(self.nodes):
            raise KeyError(f"unknown node id {node}")
        self.fixed.add(int(node))

    @property
    def thetas(self) -> np.ndarray:
        if not self.nodes:
            return np.zeros((0, 7))
        return np.stack([n.theta for n in self.nodes])

    @thetas.setter
    def thetas(self, values) -> None:
        values = np.asarray(values, dtype=float)
        for node, theta in zip(self.nodes, values):
            node.theta = theta.copy()

    def poses(self) -> list[Sim3]:
        return [v2t(n.theta) for n in self.nodes]

    def positions(self) -> np.ndarray:
        return self.thetas[:, :3]

    def copy(self) -> "PoseGraph":
        return copy.deepcopy(self)

    def components(self) -> list[list[int]]:
        n = len(self.nodes)
        if n == 0:
            return []
        rows = [e.i for e in self.edges]
        cols = [e.j for e in self.edges]
        adj = coo_matrix((np.ones(len(rows)), (rows, cols)), shape=(n, n))
        count, labels = connected_components(adj, directed=False)
        return [np.flatnonzero(labels == c).tolist() for c in range(count)]

    def validate(self) -> list[Finding]:
        """Structural problems that would make optimization ill-posed."""
        findings: list[Finding] = []
        n = len(self.nodes)
        for node in self.nodes:
            if not np.all(np.isfinite(node.theta)):
                findings.append(Finding("non-finite-pose", f"node {node.id} has a non-finite pose",
                                        {"node": node.id}))
        dangling = False
        for k, e in enumerate(self.edges):
            if not (0 <= e.i < n and 0 <= e.j < n):
                dangling = True
                findings.append(Finding("dangling-edge", f"edge {k} references a missing node",
                                        {"edge": k, "i": e.i, "j": e.j}))
                continue
            info = e.information
            if not np.allclose(info, info.T, atol=1e-12, rtol=0.0):
                findings.append(Finding("asymmetric-information",
                                        f"edge {k} information is not symmetric", {"edge": k}))
            elif np.linalg.eigvalsh(info).min() < -1e-12:
                findings.append(Finding("non-psd-information",
                                        f"edge {k} information is not positive semidefinite",
                                        {"edge": k}))
        for f in self.fixed:
            if not 0 <= f < n:
                findings.append(Finding("dangling-fix", f"fixed id {f} is not a node", {"node": f}))
        if n and not self.fixed:
            findings.append(Finding("gauge-free", "no node is held fixed"))
        if n and not dangling:
            comps = self.components()
            if len(comps) > 1:
                sizes = sorted((len(c) for c in comps), reverse=True)
                findings.append(Finding("disconnected", f"graph has {len(comps)} components",
                                        {"sizes": sizes}))
        return findings

    def initialize_by_concatenation(self) -> None:
        """Chain the odometry measurements ``k -> k+1`` starting from identity.

        Scale-free edges contribute no scale change.

        Raises:
            ValueError: if some link of the chain has no edge.
        """
        chain: dict[tuple[int, int], Edge] = {}
        for e in self.edges:
            chain.setdefault((e.i, e.j), e)
        if not self.nodes:
            return
        pose = Sim3.identity()
        self.nodes[0].theta = t2v(pose)
        for k in range(len(self.nodes) - 1):
            step = _chain_step(chain, k)
            pose = compose(pose, step)
            theta = t2v(pose)
            theta[3:6] = canonical_rotvec(theta[3:6])
            self.nodes[k + 1].theta = theta


def _chain_step(chain, k: int) -> Sim3:
    e = chain.get((k, k + 1))
    if e is not None:
        meas = e.measurement.copy()
        if e.scale_free:
            meas[SCALE] = 0.0
        return v2t(meas)
    e = chain.get((k + 1, k))
    if e is None:
        raise ValueError(f"no odometry edge between nodes {k} and {k + 1}")
    meas = e.measurement.copy()
    if e.scale_free:
        meas[SCALE] = 0.0
    return v2t(meas).inverse()
