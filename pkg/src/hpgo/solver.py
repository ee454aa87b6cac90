"""Hybrid Sim(3) pose graph objective and its Levenberg-Marquardt solver."""

from __future__ import annotations

import enum
import logging
import time
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
import scipy.sparse as sp

from .graph import SCALE, Edge, EdgeKind, PoseGraph
from .liegroup import (
    canonical_rotvec,
    exp_rotation,
    hat,
    log_rotation,
    relative,
    right_jacobian_inv_so3,
    right_jacobian_so3,
)

try:
    from sksparse.cholmod import CholmodNotPositiveDefiniteError, cholesky as _cholmod
except ImportError:  # pragma: no cover - exercised only without scikit-sparse
    _cholmod = None
    CholmodNotPositiveDefiniteError = np.linalg.LinAlgError

log = logging.getLogger(__name__)

MAX_DAMPING = 1e16


class Mode(enum.Enum):
    SPGO = "spgo"
    HPGO = "hpgo"


class KernelKind(enum.Enum):
    NONE = "none"
    HUBER = "huber"


class SolverError(RuntimeError):
    pass


@dataclass(frozen=True)
class RobustKernel:
    kind: KernelKind = KernelKind.NONE
    delta: float = 1.0

    def __post_init__(self):
        if not self.delta > 0:
            raise ValueError("kernel delta must be positive")

    def rho(self, q: float) -> float:
        """Kernel applied to the squared Mahalanobis norm ``q``."""
        if self.kind is KernelKind.NONE or q <= self.delta ** 2:
            return float(q)
        return float(2.0 * self.delta * np.sqrt(q) - self.delta ** 2)

    def weight(self, q: float) -> float:
        """``d rho / d q``, the IRLS weight."""
        if self.kind is KernelKind.NONE or q <= self.delta ** 2:
            return 1.0
        return float(self.delta / np.sqrt(q))


@dataclass
class SolverConfig:
    max_iterations: int = 200
    initial_damping: float = 1e-4
    damping_up: float = 10.0
    damping_down: float = 10.0
    cost_rel_tolerance: float = 1e-12
    step_tolerance: float = 1e-12
    kernel: RobustKernel = field(default_factory=RobustKernel)
    mode: Mode = Mode.HPGO

    def __post_init__(self):
        if self.cost_rel_tolerance <= 0 or self.step_tolerance <= 0:
            raise ValueError("tolerances must be positive")
        if self.initial_damping <= 0 or self.damping_up <= 1 or self.damping_down <= 1:
            raise ValueError("damping must be positive and its factors > 1")
        if self.max_iterations < 0:
            raise ValueError("max_iterations must be non-negative")


@dataclass
class SolveReport:
    iterations: int
    initial_cost: float
    final_cost: float
    cost_trace: list[float]
    reason: str
    wall_time: float
    accepted: int = 0
    rejected: int = 0

    @property
    def converged(self) -> bool:
        return self.reason != "max-iterations"

    def to_dict(self) -> dict:
        return {
            "iterations": self.iterations,
            "initial_cost": self.initial_cost,
            "final_cost": self.final_cost,
            "cost_trace": list(self.cost_trace),
            "reason": self.reason,
            "converged": self.converged,
            "accepted_steps": self.accepted,
            "rejected_steps": self.rejected,
            "wall_time": self.wall_time,
        }


def residual_selector(edge: Edge, mode: Mode = Mode.HPGO) -> int:
    """1 for the scale-aware residual, 2 for the scale-blind one."""
    return 2 if (mode is Mode.HPGO and edge.scale_free) else 1


def residual_regular(theta_i, theta_j, measurement) -> np.ndarray:
    return relative(theta_i, theta_j) - np.asarray(measurement, dtype=float)


def residual_scalefree(theta_i, theta_j, measurement) -> np.ndarray:
    r = residual_regular(theta_i, theta_j, measurement)
    r[SCALE] = 0.0
    return r


def effective_information(edge: Edge, mode: Mode = Mode.HPGO) -> np.ndarray:
    """Information used in the objective.

    In SPGO mode a scale-free edge is treated as a regular edge that measured
    "no scale change", with unit weight on the scale slot.
    """
    if edge.scale_free and mode is Mode.SPGO and edge.information[SCALE, SCALE] == 0.0:
        info = edge.information.copy()
        info[SCALE, SCALE] = 1.0
        return info
    return edge.information


def edge_residual(edge: Edge, theta_i, theta_j, mode: Mode = Mode.HPGO) -> np.ndarray:
    if residual_selector(edge, mode) == 2:
        return residual_scalefree(theta_i, theta_j, edge.measurement)
    return residual_regular(theta_i, theta_j, edge.measurement)


def edge_cost(edge: Edge, theta_i, theta_j, kernel: RobustKernel = RobustKernel(),
              mode: Mode = Mode.HPGO) -> float:
    r = edge_residual(edge, theta_i, theta_j, mode)
    return kernel.rho(float(r @ effective_information(edge, mode) @ r))


def total_cost(graph: PoseGraph, kernel: RobustKernel = RobustKernel(),
               mode: Mode = Mode.HPGO, thetas=None) -> float:
    thetas = graph.thetas if thetas is None else thetas
    return float(sum(edge_cost(e, thetas[e.i], thetas[e.j], kernel, mode) for e in graph.edges))


def edge_jacobians(edge: Edge, theta_i, theta_j, mode: Mode = Mode.HPGO):
    """Jacobians of the edge residual w.r.t. additive updates of both minimal vectors."""
    theta_i = np.asarray(theta_i, dtype=float)
    theta_j = np.asarray(theta_j, dtype=float)
    Ri = exp_rotation(theta_i[3:6])
    Rj = exp_rotation(theta_j[3:6])
    a = np.exp(-theta_i[SCALE])
    RiT = Ri.T
    u = RiT @ (theta_j[:3] - theta_i[:3])
    Rij = RiT @ Rj
    Jr_inv_ij = right_jacobian_inv_so3(log_rotation(Rij))

    Ji = np.zeros((7, 7))
    Jj = np.zeros((7, 7))
    Jr_i = right_jacobian_so3(theta_i[3:6])
    Ji[:3, :3] = -a * RiT
    Ji[:3, 3:6] = a * hat(u) @ Jr_i
    Ji[:3, SCALE] = -a * u
    Ji[3:6, 3:6] = -Jr_inv_ij @ Rij.T @ Jr_i
    Jj[:3, :3] = a * RiT
    Jj[3:6, 3:6] = Jr_inv_ij @ right_jacobian_so3(theta_j[3:6])
    if residual_selector(edge, mode) == 1:
        Ji[SCALE, SCALE] = -1.0
        Jj[SCALE, SCALE] = 1.0
    return Ji, Jj


def set_gauge(graph: PoseGraph, node: int) -> None:
    graph.set_gauge(node)


def _factor_solve(H: sp.csc_matrix, g: np.ndarray) -> np.ndarray:
    """Solve the SPD system ``H x = g``; raises LinAlgError when ``H`` is not SPD."""
    if _cholmod is not None:
        try:
            return _cholmod(H, mode="supernodal")(g)
        except CholmodNotPositiveDefiniteError as exc:
            raise np.linalg.LinAlgError(str(exc)) from exc
    c = scipy.linalg.cho_factor(H.toarray())
    return scipy.linalg.cho_solve(c, g)


class _Problem:
    def __init__(self, graph: PoseGraph, config: SolverConfig):
        self.graph = graph
        self.config = config
        free = [n.id for n in graph.nodes if n.id not in graph.fixed]
        self.slot = {node: k for k, node in enumerate(free)}
        self.free = free
        self.dim = 7 * len(free)
        self.info = [effective_information(e, config.mode) for e in graph.edges]

    def cost(self, thetas) -> float:
        kernel, mode = self.config.kernel, self.config.mode
        total = 0.0
        for e, info in zip(self.graph.edges, self.info):
            r = edge_residual(e, thetas[e.i], thetas[e.j], mode)
            total += kernel.rho(float(r @ info @ r))
        return total

    def normal_equations(self, thetas):
        kernel, mode = self.config.kernel, self.config.mode
        rows, cols, vals = [], [], []
        g = np.zeros(self.dim)
        cost = 0.0
        for e, info in zip(self.graph.edges, self.info):
            r = edge_residual(e, thetas[e.i], thetas[e.j], mode)
            q = float(r @ info @ r)
            cost += kernel.rho(q)
            w = kernel.weight(q)
            Ji, Jj = edge_jacobians(e, thetas[e.i], thetas[e.j], mode)
            blocks = [(self.slot.get(e.i), Ji), (self.slot.get(e.j), Jj)]
            blocks = [(k, J) for k, J in blocks if k is not None]
            WJ = {id(J): w * (info @ J) for _, J in blocks}
            for ka, Ja in blocks:
                g[7 * ka:7 * ka + 7] += Ja.T @ (w * (info @ r))
                for kb, Jb in blocks:
                    blk = Ja.T @ WJ[id(Jb)]
                    r0, c0 = np.meshgrid(np.arange(7) + 7 * ka, np.arange(7) + 7 * kb,
                                         indexing="ij")
                    rows.append(r0.ravel())
                    cols.append(c0.ravel())
                    vals.append(blk.ravel())
        if rows:
            H = sp.coo_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                              shape=(self.dim, self.dim)).tocsc()
        else:
            H = sp.csc_matrix((self.dim, self.dim))
        return H, g, cost

    def apply(self, thetas, delta):
        out = thetas.copy()
        for node, k in self.slot.items():
            th = out[node] + delta[7 * k:7 * k + 7]
            th[3:6] = canonical_rotvec(th[3:6])
            out[node] = th
        return out


def optimize(graph: PoseGraph, config: SolverConfig | None = None) -> SolveReport:
    """Minimize the (hybrid) objective in place with Levenberg-Marquardt.

    Fixed nodes stay bitwise unchanged.

    Raises:
        SolverError: when the graph has no fixed node, the cost is not finite,
            or the damped normal equations cannot be factorized.
    """
    config = config or SolverConfig()
    start = time.perf_counter()
    if graph.nodes and not graph.fixed:
        raise SolverError("graph has no fixed node (gauge-free)")
    problem = _Problem(graph, config)
    thetas = graph.thetas
    if not np.all(np.isfinite(thetas)):
        raise SolverError("initial cost is not finite (non-finite node pose)")
    cost = problem.cost(thetas)
    if not np.isfinite(cost):
        raise SolverError("initial cost is not finite")
    trace = [cost]
    initial = cost
    lam = config.initial_damping
    accepted = rejected = 0
    reason = "max-iterations"
    iterations = 0

    if problem.dim == 0:
        reason = "all-fixed"
    elif cost == 0.0:
        reason = "zero-cost"

    H = g = None
    while reason == "max-iterations" and iterations < config.max_iterations:
        if H is None:
            H, g, _ = problem.normal_equations(thetas)
        iterations += 1
        try:
            delta = -_factor_solve((H + lam * sp.identity(problem.dim, format="csc")).tocsc(), g)
        except np.linalg.LinAlgError:
            lam *= config.damping_up
            rejected += 1
            if lam > MAX_DAMPING:
                raise SolverError("normal equations not positive definite at maximum damping")
            continue
        step = float(np.max(np.abs(delta)))
        candidate = problem.apply(thetas, delta)
        new_cost = problem.cost(candidate)
        if np.isfinite(new_cost) and new_cost < cost:
            decrease = (cost - new_cost) / cost
            thetas, cost = candidate, new_cost
            trace.append(cost)
            accepted += 1
            lam = max(lam / config.damping_down, 1e-15)
            H = None
            if cost == 0.0:
                reason = "zero-cost"
            elif decrease < config.cost_rel_tolerance:
                reason = "cost-tolerance"
            elif step < config.step_tolerance:
                reason = "step-tolerance"
        else:
            rejected += 1
            lam *= config.damping_up
            if step < config.step_tolerance:
                reason = "step-tolerance"
            elif lam > MAX_DAMPING:
                reason = "damping-limit"
        log.debug("iter %d cost %.6e lambda %.1e", iterations, cost, lam)

    graph.thetas = thetas
    return SolveReport(iterations, initial, cost, trace, reason,
                       time.perf_counter() - start, accepted, rejected)
