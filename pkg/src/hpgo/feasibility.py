"""Can a single global scale be reconciled?

Nodes at either end of a scale-free edge are *critical*.  Every stretch of
the graph that is internally scale-consistent and touches critical nodes
becomes a *bar* between them.  Keeping every bar's direction while letting
its length change by ``lambda_k`` gives the homogeneous system ``A x = 0``
over stacked critical positions and bar scales; one row block pins the
first position.  A single null vector (the trivial global rescaling) means
the scale is recoverable everywhere on the construct.
"""

from __future__ import annotations

import enum
import itertools
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from .graph import PoseGraph

DEFAULT_THRESHOLD = 1e-8
DEFAULT_MERGE_RADIUS = 1e-6


class Verdict(str, enum.Enum):
    GLOBALLY_CONSISTENT = "GloballyConsistent"
    UNDERCONSTRAINED = "Underconstrained"
    NO_LOOP = "NoLoop"


@dataclass(frozen=True)
class CriticalNode:
    members: tuple[int, ...]
    position: np.ndarray

    @property
    def node(self) -> int:
        return self.members[0]


@dataclass(frozen=True)
class Bar:
    start: int
    end: int
    v: np.ndarray

    @property
    def self_loop(self) -> bool:
        return self.start == self.end


@dataclass
class FeasibilityMatrix:
    A: np.ndarray
    N: int
    B: int


@dataclass
class FeasibilityReport:
    singular_values: np.ndarray
    nullity: int
    verdict: Verdict
    threshold: float
    null_vectors: np.ndarray
    bar_scale_patterns: list[list[float]]
    critical_nodes: list[CriticalNode] = field(default_factory=list)
    bars: list[Bar] = field(default_factory=list)
    excluded: list[list[int]] = field(default_factory=list)
    dangling: list[list[int]] = field(default_factory=list)

    @property
    def consistent(self) -> bool:
        return self.verdict is Verdict.GLOBALLY_CONSISTENT

    def to_dict(self) -> dict:
        return {
            "verdict": self.verdict.value,
            "nullity": int(self.nullity),
            "threshold": self.threshold,
            "singular_values": [float(s) for s in self.singular_values],
            "bar_scale_patterns": self.bar_scale_patterns,
            "critical_nodes": [
                {"members": list(c.members), "position": [float(x) for x in c.position]}
                for c in self.critical_nodes
            ],
            "bars": [
                {"start": b.start, "end": b.end, "v": [float(x) for x in b.v]} for b in self.bars
            ],
            "excluded_critical_nodes": self.excluded,
            "dangling_pieces": self.dangling,
        }


def extract_critical_nodes(graph: PoseGraph, positions=None,
                           merge_radius: float = DEFAULT_MERGE_RADIUS) -> list[CriticalNode]:
    """Endpoints of scale-free edges, ordered by first appearance.

    The two endpoints of one scale-free edge are merged when their positions
    lie within ``merge_radius`` of each other (an in-place re-initialization).
    """
    P = graph.positions() if positions is None else np.asarray(positions, dtype=float)
    parent: dict[int, int] = {}

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    order: list[int] = []
    for e in graph.edges:
        if not e.scale_free:
            continue
        for n in (e.i, e.j):
            if n not in parent:
                parent[n] = n
                order.append(n)
        if np.linalg.norm(P[e.i] - P[e.j]) <= merge_radius:
            ri, rj = find(e.i), find(e.j)
            if ri != rj:
                parent[max(ri, rj)] = min(ri, rj)

    groups: dict[int, list[int]] = {}
    for n in order:
        groups.setdefault(find(n), []).append(n)
    out = []
    for members in sorted(groups.values(), key=lambda g: order.index(g[0])):
        members = sorted(members)
        out.append(CriticalNode(tuple(members), P[members].mean(axis=0)))
    return out


def _pieces(graph: PoseGraph) -> np.ndarray:
    """Component label per node over regular edges only (scale-consistent pieces)."""
    n = len(graph.nodes)
    reg = [(e.i, e.j) for e in graph.edges if not e.scale_free]
    rows = [a for a, _ in reg]
    cols = [b for _, b in reg]
    adj = coo_matrix((np.ones(len(reg)), (rows, cols)), shape=(n, n))
    return connected_components(adj, directed=False)[1]


def contract(graph: PoseGraph, critical_nodes: list[CriticalNode]):
    """Bars of the construct plus the critical-node indices of dangling pieces.

    A scale-consistent piece touching two or more distinct critical nodes
    yields a bar between every pair of them.  A piece that comes back to a
    single critical node through two different graph nodes yields a
    zero-length self-bar.  A piece touching one critical node once is
    dangling: its scale cannot be pinned by any loop.
    """
    owner = {m: k for k, c in enumerate(critical_nodes) for m in c.members}
    labels = _pieces(graph)
    touch: dict[int, dict[int, set[int]]] = {}
    for node, k in owner.items():
        touch.setdefault(int(labels[node]), {}).setdefault(k, set()).add(node)

    bars: list[Bar] = []
    dangling: list[int] = []
    pos = [c.position for c in critical_nodes]
    for piece in sorted(touch, key=lambda p: min(min(s) for s in touch[p].values())):
        terms = touch[piece]
        ks = sorted(terms)
        if len(ks) >= 2:
            for a, b in itertools.combinations(ks, 2):
                bars.append(Bar(a, b, pos[b] - pos[a]))
        elif len(terms[ks[0]]) >= 2:
            bars.append(Bar(ks[0], ks[0], np.zeros(3)))
        else:
            dangling.append(ks[0])
    for e in graph.edges:
        if e.scale_free and owner[e.i] != owner[e.j]:
            a, b = owner[e.i], owner[e.j]
            bars.append(Bar(a, b, pos[b] - pos[a]))
    return bars, dangling


def extract_bars(graph: PoseGraph, critical_nodes: list[CriticalNode]) -> list[Bar]:
    return contract(graph, critical_nodes)[0]


def bars_from_pairs(positions, pairs) -> tuple[list[CriticalNode], list[Bar]]:
    """Construct from explicit critical positions and ``(start, end)`` index pairs."""
    P = np.asarray(positions, dtype=float).reshape(-1, 3)
    nodes = [CriticalNode((k,), P[k]) for k in range(len(P))]
    bars = [Bar(int(s), int(e), P[e] - P[s]) for s, e in pairs]
    return nodes, bars


def build_feasibility_matrix(critical_nodes, bars: list[Bar]) -> FeasibilityMatrix:
    N, B = len(critical_nodes), len(bars)
    if N < 1 or B < 1:
        raise ValueError("need at least one critical node and one bar")
    A = np.zeros((3 * B + 3, 3 * N + B))
    eye = np.eye(3)
    for k, bar in enumerate(bars):
        r = slice(3 * k, 3 * k + 3)
        A[r, 3 * bar.start:3 * bar.start + 3] -= eye
        A[r, 3 * bar.end:3 * bar.end + 3] += eye
        A[r, 3 * N + k] = -bar.v
    A[3 * B:, :3] = eye
    return FeasibilityMatrix(A, N, B)


def analyze(matrix: FeasibilityMatrix, threshold: float = DEFAULT_THRESHOLD) -> FeasibilityReport:
    """Singular spectrum, nullity and verdict.

    Singular values below ``threshold * sigma_max`` count as zero.  The
    spectrum is padded with zeros to one value per unknown, so its length is
    always ``3N + B``.
    """
    A = matrix.A
    _, s, Vt = np.linalg.svd(A, full_matrices=True)
    smax = s[0] if len(s) else 0.0
    rank = int(np.sum(s >= threshold * smax)) if smax > 0 else 0
    s = np.concatenate([s, np.zeros(A.shape[1] - len(s))])
    nullity = A.shape[1] - rank
    null = Vt[rank:]
    patterns = []
    for v in null:
        lam = v[3 * matrix.N:]
        scale = np.max(np.abs(lam))
        patterns.append([float(x) for x in (lam / scale if scale > 0 else lam)])
    verdict = Verdict.GLOBALLY_CONSISTENT if nullity == 1 else Verdict.UNDERCONSTRAINED
    return FeasibilityReport(s, nullity, verdict, threshold, null, patterns)


def analyze_graph(graph: PoseGraph, positions=None, threshold: float = DEFAULT_THRESHOLD,
                  merge_radius: float = DEFAULT_MERGE_RADIUS) -> FeasibilityReport:
    """Full retrospective check on a graph, by default at its current node positions."""
    crit = extract_critical_nodes(graph, positions, merge_radius)
    bars, dangling = contract(graph, crit)
    used = sorted({b.start for b in bars} | {b.end for b in bars})
    excluded = [list(crit[k].members) for k in range(len(crit)) if k not in used]
    # pieces of the trajectory whose scale no loop can pin (NoLoop findings)
    loose = [list(crit[k].members) for k in dangling]
    if not bars:
        return FeasibilityReport(np.zeros(0), 0, Verdict.NO_LOOP, threshold, np.zeros((0, 0)),
                                 [], crit, [], excluded, loose)
    remap = {k: i for i, k in enumerate(used)}
    nodes = [crit[k] for k in used]
    kept = [Bar(remap[b.start], remap[b.end], b.v) for b in bars]
    report = analyze(build_feasibility_matrix(nodes, kept), threshold)
    report.critical_nodes = nodes
    report.bars = kept
    report.excluded = excluded
    report.dangling = loose
    return report
