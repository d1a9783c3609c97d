"""SO(3) and extended-pose matrix group operations.

The navigation state (orientation, velocity, position) is embedded in the
5x5 matrix group

    X = [[R, v, p],
         [0, 1, 0],
         [0, 0, 1]]

with the 9-dof tangent vector ordered (theta, v, p).  All maps are closed
form with series fallbacks near the identity.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# rotation-angle series kick in below this
_SMALL_ANGLE = 1e-8
_SMALL_JAC = 1e-6


class AngleNearPi(ValueError):
    """Rotation too close to pi radians for a stable logarithm."""


def so3_wedge(w):
    """Map a 3-vector to its skew-symmetric matrix (hat operator)."""
    w = np.asarray(w, dtype=float)
    return np.array([
        [0.0, -w[2], w[1]],
        [w[2], 0.0, -w[0]],
        [-w[1], w[0], 0.0],
    ])


def so3_vee(M):
    """Inverse of :func:`so3_wedge` (takes the skew part first)."""
    M = np.asarray(M, dtype=float)
    A = 0.5 * (M - M.T)
    return np.array([A[2, 1], A[0, 2], A[1, 0]])


def so3_exp(w):
    """Rodrigues exponential of a rotation vector."""
    w = np.asarray(w, dtype=float)
    theta = np.linalg.norm(w)
    W = so3_wedge(w)
    if theta < _SMALL_ANGLE:
        # second-order Taylor; exact to machine precision at this scale
        return np.eye(3) + W + 0.5 * (W @ W)
    s = np.sin(theta) / theta
    c = (1.0 - np.cos(theta)) / (theta * theta)
    return np.eye(3) + s * W + c * (W @ W)


def so3_log(R):
    """Rotation vector of R.  Raises AngleNearPi within ~1e-6 of pi.

    Valid for rotation angles below pi - 1e-6; the antisymmetric part of R
    no longer determines the axis at pi itself.
    """
    R = np.asarray(R, dtype=float)
    tr = np.trace(R)
    # angle >= pi - 1e-6  <=>  trace <= -1 + (1e-6)^2
    if tr <= -1.0 + 1e-12:
        raise AngleNearPi(f"rotation angle within 1e-6 of pi (trace={tr!r})")
    cos_theta = np.clip(0.5 * (tr - 1.0), -1.0, 1.0)
    theta = np.arccos(cos_theta)
    axis_twice_sin = np.array([R[2, 1] - R[1, 2], R[0, 2] - R[2, 0], R[1, 0] - R[0, 1]])
    if theta < _SMALL_ANGLE:
        # theta/(2 sin theta) ~ 1/2 + theta^2/12
        return 0.5 * axis_twice_sin
    return (theta / (2.0 * np.sin(theta))) * axis_twice_sin


def so3_left_jacobian(phi):
    """Left Jacobian of SO(3): J_l(phi) = I + c1*phi^ + c2*(phi^)^2."""
    phi = np.asarray(phi, dtype=float)
    theta = np.linalg.norm(phi)
    W = so3_wedge(phi)
    if theta < _SMALL_JAC:
        return np.eye(3) + 0.5 * W + (1.0 / 6.0) * (W @ W)
    c1 = (1.0 - np.cos(theta)) / (theta * theta)
    c2 = (theta - np.sin(theta)) / (theta ** 3)
    return np.eye(3) + c1 * W + c2 * (W @ W)


def so3_right_jacobian(phi):
    """Right Jacobian of SO(3); equals the left Jacobian of -phi."""
    return so3_left_jacobian(-np.asarray(phi, dtype=float))


def so3_left_jacobian_inv(phi):
    """Inverse left Jacobian, closed form with series below 1e-6."""
    phi = np.asarray(phi, dtype=float)
    theta = np.linalg.norm(phi)
    W = so3_wedge(phi)
    if theta < _SMALL_JAC:
        return np.eye(3) - 0.5 * W + (1.0 / 12.0) * (W @ W)
    c = 1.0 / (theta * theta) - (1.0 + np.cos(theta)) / (2.0 * theta * np.sin(theta))
    return np.eye(3) - 0.5 * W + c * (W @ W)


@dataclass(frozen=True)
class GroupElement:
    """Element of the 5x5 extended-pose group: rotation, velocity, position."""

    rot: np.ndarray
    vel: np.ndarray
    pos: np.ndarray

    def as_matrix(self) -> np.ndarray:
        M = np.eye(5)
        M[:3, :3] = self.rot
        M[:3, 3] = self.vel
        M[:3, 4] = self.pos
        return M

    @staticmethod
    def from_matrix(M) -> "GroupElement":
        M = np.asarray(M, dtype=float)
        return GroupElement(rot=M[:3, :3].copy(), vel=M[:3, 3].copy(), pos=M[:3, 4].copy())

    @staticmethod
    def identity() -> "GroupElement":
        return GroupElement(np.eye(3), np.zeros(3), np.zeros(3))


def vec9_wedge(xi):
    """Embed a 9-vector (theta, v, p) in the 5x5 Lie algebra.

    The rotation part fills the top-left skew block, the velocity part
    column 4 and the position part column 5; the bottom two rows are zero.
    """
    xi = np.asarray(xi, dtype=float)
    M = np.zeros((5, 5))
    M[:3, :3] = so3_wedge(xi[:3])
    M[:3, 3] = xi[3:6]
    M[:3, 4] = xi[6:9]
    return M


def vec9_vee(M):
    """Inverse of :func:`vec9_wedge`."""
    M = np.asarray(M, dtype=float)
    out = np.empty(9)
    out[:3] = so3_vee(M[:3, :3])
    out[3:6] = M[:3, 3]
    out[6:9] = M[:3, 4]
    return out


def group_exp(xi) -> GroupElement:
    """Exponential map of the extended-pose group.

    Closed form: exp(xi^) has rotation exp(theta^), and the velocity and
    position columns are the left Jacobian applied to the respective
    tangent components.
    """
    xi = np.asarray(xi, dtype=float)
    theta = xi[:3]
    J = so3_left_jacobian(theta)
    return GroupElement(rot=so3_exp(theta), vel=J @ xi[3:6], pos=J @ xi[6:9])


def group_log(X: GroupElement) -> np.ndarray:
    """Inverse of :func:`group_exp` (9-vector)."""
    theta = so3_log(X.rot)
    Jinv = so3_left_jacobian_inv(theta)
    out = np.empty(9)
    out[:3] = theta
    out[3:6] = Jinv @ X.vel
    out[6:9] = Jinv @ X.pos
    return out


def group_inverse(X: GroupElement) -> GroupElement:
    """Group inverse: (R, v, p) -> (R^T, -R^T v, -R^T p)."""
    Rt = X.rot.T
    return GroupElement(rot=Rt.copy(), vel=-(Rt @ X.vel), pos=-(Rt @ X.pos))


def group_compose(A: GroupElement, B: GroupElement) -> GroupElement:
    """Group product A*B in the 5x5 embedding."""
    return GroupElement(
        rot=A.rot @ B.rot,
        vel=A.rot @ B.vel + A.vel,
        pos=A.rot @ B.pos + A.pos,
    )
