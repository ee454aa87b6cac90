"""SO(3) / Sim(3) primitives.

Minimal pose vectors are laid out as ``[t(3), phi(3), s]``: the raw
translation of the homogeneous transform, the rotation vector of its
rotation block and the log-scale.  ``v2t`` / ``t2v`` convert between that
layout and :class:`Sim3`.  The true group exponential and logarithm (with the
translation coupled through the left Jacobian) are available as
:func:`sim3_exp` / :func:`sim3_log`.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

SMALL_ANGLE = 1e-6
ORTHONORMAL_TOL = 1e-6

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(32)
_GL_NODES = 0.5 * (_GL_NODES + 1.0)
_GL_WEIGHTS = 0.5 * _GL_WEIGHTS


def hat(v):
    """Skew-symmetric matrix such that ``hat(a) @ b == cross(a, b)``."""
    x, y, z = v
    return np.array([[0.0, -z, y], [z, 0.0, -x], [-y, x, 0.0]])


def vee(m):
    return np.array([m[2, 1], m[0, 2], m[1, 0]])


def exp_rotation(phi) -> np.ndarray:
    """Rodrigues formula."""
    phi = np.asarray(phi, dtype=float)
    theta2 = float(phi @ phi)
    theta = np.sqrt(theta2)
    K = hat(phi)
    if theta < SMALL_ANGLE:
        a = 1.0 - theta2 / 6.0
        b = 0.5 - theta2 / 24.0
    else:
        a = np.sin(theta) / theta
        b = (1.0 - np.cos(theta)) / theta2
    return np.eye(3) + a * K + b * (K @ K)


def check_rotation(R, tol: float = ORTHONORMAL_TOL) -> None:
    R = np.asarray(R, dtype=float)
    if R.shape != (3, 3) or not np.all(np.isfinite(R)):
        raise ValueError("rotation must be a finite 3x3 matrix")
    residual = np.linalg.norm(R.T @ R - np.eye(3))
    if residual > tol:
        raise ValueError(f"matrix is not orthonormal (residual {residual:.3g})")
    if np.linalg.det(R) < 0:
        raise ValueError("matrix is a reflection (det < 0)")


def log_rotation(R) -> np.ndarray:
    """Rotation vector with norm in ``[0, pi]``.

    Raises:
        ValueError: if ``R`` is not orthonormal to within 1e-6.
    """
    R = np.asarray(R, dtype=float)
    check_rotation(R)
    w = 0.5 * vee(R - R.T)
    sin_theta = np.linalg.norm(w)
    cos_theta = 0.5 * (np.trace(R) - 1.0)
    theta = np.arctan2(sin_theta, cos_theta)
    if theta < SMALL_ANGLE:
        return w * (1.0 + theta * theta / 6.0)
    if np.pi - theta > 1e-3:
        return w * (theta / sin_theta)
    # near pi the antisymmetric part vanishes; read the axis off the symmetric part
    B = 0.5 * (R + R.T) - cos_theta * np.eye(3)
    k = int(np.argmax(np.diag(B)))
    axis = B[:, k] / np.sqrt(B[k, k] * (1.0 - cos_theta))
    axis /= np.linalg.norm(axis)
    if axis @ w < 0:
        axis = -axis
    return axis * theta


def canonical_rotvec(phi) -> np.ndarray:
    """Equivalent rotation vector with norm in ``[0, pi]``."""
    phi = np.asarray(phi, dtype=float)
    theta = np.linalg.norm(phi)
    if theta <= np.pi:
        return phi.copy()
    wrapped = np.mod(theta + np.pi, 2.0 * np.pi) - np.pi
    return phi * (wrapped / theta)


def right_jacobian_so3(phi) -> np.ndarray:
    """``exp(phi + d) ~= exp(phi) @ exp(Jr(phi) @ d)``."""
    phi = np.asarray(phi, dtype=float)
    theta2 = float(phi @ phi)
    theta = np.sqrt(theta2)
    K = hat(phi)
    if theta < SMALL_ANGLE:
        b = 0.5 - theta2 / 24.0
        c = 1.0 / 6.0 - theta2 / 120.0
    else:
        b = (1.0 - np.cos(theta)) / theta2
        c = (theta - np.sin(theta)) / (theta2 * theta)
    return np.eye(3) - b * K + c * (K @ K)


def right_jacobian_inv_so3(phi) -> np.ndarray:
    phi = np.asarray(phi, dtype=float)
    theta2 = float(phi @ phi)
    theta = np.sqrt(theta2)
    K = hat(phi)
    if theta < SMALL_ANGLE:
        d = 1.0 / 12.0 + theta2 / 720.0
    else:
        d = 1.0 / theta2 - (1.0 + np.cos(theta)) / (2.0 * theta * np.sin(theta))
    return np.eye(3) + 0.5 * K + d * (K @ K)


@dataclass(frozen=True)
class Sim3:
    """Similarity transform ``p -> exp(s) * R @ p + t``."""

    R: np.ndarray
    t: np.ndarray
    s: float = 0.0

    def __post_init__(self):
        R = np.array(self.R, dtype=float).reshape(3, 3)
        t = np.array(self.t, dtype=float).reshape(3)
        R.flags.writeable = False
        t.flags.writeable = False
        object.__setattr__(self, "R", R)
        object.__setattr__(self, "t", t)
        object.__setattr__(self, "s", float(self.s))

    @classmethod
    def identity(cls) -> "Sim3":
        return cls(np.eye(3), np.zeros(3), 0.0)

    @classmethod
    def from_matrix(cls, M) -> "Sim3":
        M = np.asarray(M, dtype=float)
        sR = M[:3, :3]
        scale = np.cbrt(np.linalg.det(sR))
        if not scale > 0:
            raise ValueError("upper-left block is not a positive similarity")
        return cls(sR / scale, M[:3, 3], np.log(scale))

    @property
    def scale(self) -> float:
        return float(np.exp(self.s))

    def matrix(self) -> np.ndarray:
        M = np.eye(4)
        M[:3, :3] = np.exp(self.s) * self.R
        M[:3, 3] = self.t
        return M

    def __matmul__(self, other: "Sim3") -> "Sim3":
        return compose(self, other)

    def inverse(self) -> "Sim3":
        return inverse(self)

    def act(self, p) -> np.ndarray:
        return act_on_point(self, p)


def compose(A: Sim3, B: Sim3) -> Sim3:
    return Sim3(A.R @ B.R, A.t + np.exp(A.s) * (A.R @ B.t), A.s + B.s)


def inverse(T: Sim3) -> Sim3:
    Rt = T.R.T
    return Sim3(Rt, -np.exp(-T.s) * (Rt @ T.t), -T.s)


def act_on_point(T: Sim3, p) -> np.ndarray:
    p = np.asarray(p, dtype=float)
    return np.exp(T.s) * (p @ T.R.T) + T.t


def v2t(theta) -> Sim3:
    theta = np.asarray(theta, dtype=float)
    return Sim3(exp_rotation(theta[3:6]), theta[:3], theta[6])


def t2v(T: Sim3) -> np.ndarray:
    out = np.empty(7)
    out[:3] = T.t
    out[3:6] = log_rotation(T.R)
    out[6] = T.s
    return out


def relative(theta_i, theta_j) -> np.ndarray:
    """Minimal vector of ``T(theta_i)^-1 @ T(theta_j)``, the pose of j seen from i."""
    return t2v(compose(inverse(v2t(theta_i)), v2t(theta_j)))


def _sim3_w(phi, sigma) -> np.ndarray:
    # W = int_0^1 exp(sigma u) exp(u hat(phi)) du, by Gauss-Legendre quadrature
    theta = np.linalg.norm(phi)
    u = _GL_NODES
    e = np.exp(sigma * u) * _GL_WEIGHTS
    c = e.sum()
    if theta < SMALL_ANGLE:
        a = (e * u).sum()
        b = 0.5 * (e * u * u).sum()
    else:
        a = (e * np.sin(theta * u)).sum() / theta
        b = (e * (1.0 - np.cos(theta * u))).sum() / (theta * theta)
    K = hat(phi)
    return c * np.eye(3) + a * K + b * (K @ K)


def sim3_exp(xi) -> Sim3:
    """Group exponential of the tangent vector ``[rho, phi, sigma]``."""
    xi = np.asarray(xi, dtype=float)
    phi, sigma = xi[3:6], xi[6]
    return Sim3(exp_rotation(phi), _sim3_w(phi, sigma) @ xi[:3], sigma)


def sim3_log(T: Sim3) -> np.ndarray:
    phi = log_rotation(T.R)
    out = np.empty(7)
    out[:3] = np.linalg.solve(_sim3_w(phi, T.s), T.t)
    out[3:6] = phi
    out[6] = T.s
    return out
