"""Right-invariant Kalman filter on the extended-pose group, plus an
error-state EKF baseline with additive small-angle errors.

Both filters share the 15-dof error ordering (theta, v, p, bg, ba), the
strapdown propagation of the nominal state, and the additive discrete
process-noise interface: the caller supplies the per-step Qd (fixed,
innovation-adapted, or network-blended).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import expm

from .dynamics import (
    B_VECTOR,
    H_DVL,
    PI_PROJECT,
    DvlSample,
    ImuSample,
    NavState,
    augment_R,
    build_F,
    dvl_embed,
    strapdown_step,
)
from .geo import GroupElement, group_compose, group_exp, so3_exp, so3_wedge
from .dynamics import EARTH_RATE

_TRACE_LIMIT = 1e12
_COND_LIMIT = 1e12


class CovarianceBlowup(RuntimeError):
    """Covariance trace exceeded the divergence guard."""


class SingularInnovationCov(RuntimeError):
    """Innovation covariance numerically singular."""


@dataclass(frozen=True)
class Belief:
    """Filter belief: navigation state plus 15x15 error covariance."""

    state: NavState
    P: np.ndarray


@dataclass(frozen=True)
class UpdateRecord:
    """Diagnostics from one measurement update."""

    innovation: np.ndarray
    S: np.ndarray
    gain: np.ndarray
    correction: np.ndarray
    nis: float


def _check_trace(P):
    tr = np.trace(P)
    if not np.isfinite(tr) or tr > _TRACE_LIMIT:
        raise CovarianceBlowup(f"covariance trace {tr:.3e}")


# ------------------------------------------------------------------ IKF

def ikf_propagate(belief: Belief, u: ImuSample, dt: float, Qd: np.ndarray,
                  gravity=None) -> Belief:
    """Strapdown-propagate the state and push P through the linearized flow.

    Qd is the full 15x15 additive process-noise term for this step.
    """
    F = build_F(belief.state, gravity=gravity)
    Phi = expm(F * dt)
    P = Phi @ belief.P @ Phi.T + Qd
    P = 0.5 * (P + P.T)
    _check_trace(P)
    state = strapdown_step(belief.state, u, dt, gravity=gravity)
    return Belief(state=state, P=P)


def ikf_innovation(belief: Belief, z: DvlSample) -> np.ndarray:
    """Group-consistent innovation Pi (X y - b) = C v_b - v_hat."""
    s = belief.state
    X = s.pose.as_matrix()
    return PI_PROJECT @ (X @ dvl_embed(z.vel_body) - B_VECTOR)


def ikf_update(belief: Belief, z: DvlSample, R: np.ndarray):
    """DVL update with the right-invariant correction.

    Returns the posterior belief and an UpdateRecord.  The measurement
    covariance is mapped through the state before projection, S =
    H P H' + Pi X R_aug X' Pi', and the state correction is applied as a
    group retraction exp((-K r)^) on the pose with additive bias updates.
    """
    s = belief.state
    P = belief.P
    X = s.pose.as_matrix()
    r = ikf_innovation(belief, z)
    S = H_DVL @ P @ H_DVL.T + PI_PROJECT @ (X @ augment_R(R) @ X.T) @ PI_PROJECT.T
    S = 0.5 * (S + S.T)
    if np.linalg.cond(S) > _COND_LIMIT:
        raise SingularInnovationCov(f"cond(S) = {np.linalg.cond(S):.3e}")
    K = np.linalg.solve(S, (P @ H_DVL.T).T).T
    zeta = K @ r
    P_post = (np.eye(15) - K @ H_DVL) @ P
    P_post = 0.5 * (P_post + P_post.T)
    pose = group_compose(group_exp(-zeta[:9]), s.pose)
    state = NavState(
        pose=pose,
        bias_gyro=s.bias_gyro + zeta[9:12],
        bias_accel=s.bias_accel + zeta[12:15],
    )
    rec = UpdateRecord(innovation=r, S=S, gain=K, correction=zeta,
                       nis=float(r @ np.linalg.solve(S, r)))
    return Belief(state=state, P=P_post), rec


# ------------------------------------------------------------------ EKF baseline

def ekf_F(s: NavState, u: ImuSample) -> np.ndarray:
    """Error-state EKF dynamics matrix (body-side small-angle attitude error)."""
    W = so3_wedge(EARTH_RATE)
    w_hat = u.gyro - s.bias_gyro
    f_hat = u.accel - s.bias_accel
    F = np.zeros((15, 15))
    F[0:3, 0:3] = -so3_wedge(w_hat)
    F[0:3, 9:12] = -np.eye(3)
    F[3:6, 0:3] = -s.rot @ so3_wedge(f_hat)
    F[3:6, 3:6] = -2.0 * W
    F[3:6, 12:15] = -s.rot
    F[6:9, 3:6] = np.eye(3)
    return F


def ekf_G(s: NavState) -> np.ndarray:
    """EKF noise-input matrix for (gyro, accel, gyro-bias, accel-bias) noise."""
    G = np.zeros((15, 12))
    G[0:3, 0:3] = -np.eye(3)
    G[3:6, 3:6] = -s.rot
    G[9:12, 6:9] = np.eye(3)
    G[12:15, 9:12] = np.eye(3)
    return G


def ekf_propagate(belief: Belief, u: ImuSample, dt: float, Qd: np.ndarray,
                  gravity=None) -> Belief:
    """Nominal strapdown step plus linearized covariance propagation."""
    F = ekf_F(belief.state, u)
    Phi = expm(F * dt)
    P = Phi @ belief.P @ Phi.T + Qd
    P = 0.5 * (P + P.T)
    _check_trace(P)
    state = strapdown_step(belief.state, u, dt, gravity=gravity)
    return Belief(state=state, P=P)


def ekf_innovation(belief: Belief, z: DvlSample) -> np.ndarray:
    """Euclidean innovation z - C' v_hat in the body frame."""
    s = belief.state
    return z.vel_body - s.rot.T @ s.vel


def ekf_H(s: NavState) -> np.ndarray:
    """Measurement Jacobian of h = C' v for the additive error state."""
    H = np.zeros((3, 15))
    H[:, 0:3] = so3_wedge(s.rot.T @ s.vel)
    H[:, 3:6] = s.rot.T
    return H


def ekf_update(belief: Belief, z: DvlSample, R: np.ndarray):
    """Standard EKF measurement update with multiplicative attitude injection."""
    s = belief.state
    P = belief.P
    H = ekf_H(s)
    r = ekf_innovation(belief, z)
    S = H @ P @ H.T + R
    S = 0.5 * (S + S.T)
    if np.linalg.cond(S) > _COND_LIMIT:
        raise SingularInnovationCov(f"cond(S) = {np.linalg.cond(S):.3e}")
    K = np.linalg.solve(S, (P @ H.T).T).T
    dx = K @ r
    P_post = (np.eye(15) - K @ H) @ P
    P_post = 0.5 * (P_post + P_post.T)
    pose = GroupElement(
        rot=s.rot @ so3_exp(dx[0:3]),
        vel=s.vel + dx[3:6],
        pos=s.pos + dx[6:9],
    )
    state = NavState(
        pose=pose,
        bias_gyro=s.bias_gyro + dx[9:12],
        bias_accel=s.bias_accel + dx[12:15],
    )
    rec = UpdateRecord(innovation=r, S=S, gain=K, correction=dx,
                       nis=float(r @ np.linalg.solve(S, r)))
    return Belief(state=state, P=P_post), rec
