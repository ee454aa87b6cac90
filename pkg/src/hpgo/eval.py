"""Sim(3) trajectory alignment and absolute trajectory error."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .liegroup import Sim3, compose

DEGENERATE_RATIO = 1e-9


@dataclass
class Trajectory:
    timestamps: np.ndarray
    poses: list[Sim3]
    segments: np.ndarray | None = None

    def __post_init__(self):
        self.timestamps = np.asarray(self.timestamps, dtype=float).reshape(-1)
        if len(self.timestamps) != len(self.poses):
            raise ValueError("timestamps and poses differ in length")
        if np.any(np.diff(self.timestamps) <= 0):
            raise ValueError("timestamps must be strictly increasing")
        if self.segments is not None:
            self.segments = np.asarray(self.segments, dtype=int).reshape(-1)

    def __len__(self) -> int:
        return len(self.poses)

    @property
    def positions(self) -> np.ndarray:
        if not self.poses:
            return np.zeros((0, 3))
        return np.stack([p.t for p in self.poses])

    def transformed(self, X: Sim3) -> "Trajectory":
        """Left-compose every pose with ``X``."""
        return Trajectory(self.timestamps.copy(), [compose(X, p) for p in self.poses],
                          None if self.segments is None else self.segments.copy())

    def subset(self, index) -> "Trajectory":
        index = np.asarray(index, dtype=int)
        return Trajectory(self.timestamps[index], [self.poses[i] for i in index],
                          None if self.segments is None else self.segments[index])


@dataclass
class AteStats:
    rmse: float
    mean: float
    median: float
    std: float
    sse: float
    n: int = 0
    errors: np.ndarray = field(default_factory=lambda: np.zeros(0), repr=False)

    COLUMNS = ("rmse", "mean", "median", "std", "sse")

    def row(self) -> tuple[float, ...]:
        return tuple(getattr(self, c) for c in self.COLUMNS)

    def to_dict(self) -> dict:
        return {c: float(getattr(self, c)) for c in self.COLUMNS} | {"n": self.n}


def _cross_covariance(source, target):
    mu_s = source.mean(axis=0)
    mu_t = target.mean(axis=0)
    cov = (target - mu_t).T @ (source - mu_s) / len(source)
    return mu_s, mu_t, cov


def is_degenerate(source, target) -> bool:
    """True if the centered cross-covariance has rank < 2."""
    source = np.asarray(source, dtype=float)
    target = np.asarray(target, dtype=float)
    if len(source) < 3:
        return True
    d = np.linalg.svd(_cross_covariance(source, target)[2], compute_uv=False)
    return d[0] == 0 or d[1] <= DEGENERATE_RATIO * d[0]


def umeyama_sim3(source, target) -> Sim3:
    """Least-squares similarity mapping ``source`` points onto ``target``.

    Raises:
        ValueError: for mismatched sizes, fewer than 3 points, or a
            configuration whose cross-covariance has rank < 2.
    """
    source = np.asarray(source, dtype=float)
    target = np.asarray(target, dtype=float)
    if source.shape != target.shape or source.ndim != 2 or source.shape[1] != 3:
        raise ValueError("source and target must both be (n, 3) arrays")
    if len(source) < 3:
        raise ValueError("need at least 3 correspondences")
    mu_s, mu_t, cov = _cross_covariance(source, target)
    U, d, Vt = np.linalg.svd(cov)
    if d[0] == 0 or d[1] <= DEGENERATE_RATIO * d[0]:
        raise ValueError("degenerate point configuration (collinear or coincident)")
    if np.array_equal(source, target):
        return Sim3.identity()  # the exact optimum; skips SVD round-off
    S = np.ones(3)
    if np.linalg.det(U) * np.linalg.det(Vt) < 0:
        S[2] = -1.0
    R = U @ np.diag(S) @ Vt
    var_s = np.mean(np.sum((source - mu_s) ** 2, axis=1))
    c = float(d @ S) / var_s
    return Sim3(R, mu_t - c * R @ mu_s, np.log(c))


def alignment_window(estimate: Trajectory, reference: Trajectory, k: int = 20) -> int:
    """Number of leading poses used for alignment.

    This is ``min(k, n)`` unless that prefix is collinear, in which case it
    grows to the shortest prefix that fixes all rotational degrees of freedom.
    """
    if k < 3:
        raise ValueError("alignment needs k >= 3")
    n = len(estimate)
    m = min(k, n)
    P, Q = estimate.positions, reference.positions
    while m < n and is_degenerate(P[:m], Q[:m]):
        m += 1
    return m


def align_first_k(estimate: Trajectory, reference: Trajectory, k: int = 20) -> Trajectory:
    """Sim(3)-align ``estimate`` onto ``reference`` using its first poses."""
    if len(estimate) != len(reference):
        raise ValueError(f"trajectories differ in length ({len(estimate)} vs {len(reference)})")
    m = alignment_window(estimate, reference, k)
    X = umeyama_sim3(estimate.positions[:m], reference.positions[:m])
    return estimate.transformed(X)


def ate(estimate: Trajectory, reference: Trajectory) -> AteStats:
    """Translational error statistics of index-associated trajectories.

    The median of an even count is the lower of the two middle values.
    """
    if len(estimate) != len(reference):
        raise ValueError(f"trajectories differ in length ({len(estimate)} vs {len(reference)})")
    if len(estimate) == 0:
        raise ValueError("empty trajectories")
    e = np.linalg.norm(estimate.positions - reference.positions, axis=1)
    sse = float(e @ e)
    n = len(e)
    mean = float(e.mean())
    return AteStats(
        rmse=float(np.sqrt(sse / n)),
        mean=mean,
        median=float(np.sort(e)[(n - 1) // 2]),
        std=float(np.sqrt(np.mean((e - mean) ** 2))),
        sse=sse,
        n=n,
        errors=e,
    )


def associate(estimate: Trajectory, reference: Trajectory, max_dt: float = 0.02):
    """Pair poses by nearest timestamp; returns the two matched sub-trajectories."""
    ref_t = reference.timestamps
    if len(ref_t) == 0:
        raise ValueError("reference trajectory is empty")
    est_idx, ref_idx = [], []
    used = set()
    for a, ts in enumerate(estimate.timestamps):
        b = int(np.searchsorted(ref_t, ts))
        cands = [c for c in (b - 1, b) if 0 <= c < len(ref_t)]
        best = min(cands, key=lambda c: abs(ref_t[c] - ts))
        if abs(ref_t[best] - ts) <= max_dt and best not in used:
            used.add(best)
            est_idx.append(a)
            ref_idx.append(best)
    if not est_idx:
        raise ValueError("no timestamps could be associated")
    return estimate.subset(est_idx), reference.subset(ref_idx)


def evaluate(estimate: Trajectory, reference: Trajectory, k: int = 20) -> AteStats:
    return ate(align_first_k(estimate, reference, k), reference)
