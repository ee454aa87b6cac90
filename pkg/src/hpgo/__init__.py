"""Hybrid Sim(3) pose graph optimization with scale-blind re-initialization edges."""

from .graph import Edge, EdgeKind, PoseGraph, PoseNode
from .liegroup import Sim3, compose, inverse, t2v, v2t
from .solver import Mode, RobustKernel, SolverConfig, SolveReport, optimize, total_cost

__all__ = [
    "Edge", "EdgeKind", "PoseGraph", "PoseNode", "Sim3", "compose", "inverse", "t2v", "v2t",
    "Mode", "RobustKernel", "SolverConfig", "SolveReport", "optimize", "total_cost",
]
__version__ = "0.1.0"
