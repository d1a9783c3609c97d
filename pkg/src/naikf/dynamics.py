"""Earth-frame strapdown dynamics and the linearized invariant error model.

Navigation runs in the Earth-centered Earth-fixed frame:

    pdot = v
    vdot = C f_b - 2 w_ie x v + g(p)
    Cdot = C wedge(w_ib) - wedge(w_ie) C

where g(p) is the local (plumb-bob) gravity vector, so the centrifugal
term is folded into g and only the Coriolis term appears explicitly.
The error state is the 15-vector (theta, v, p, bg, ba): a right-invariant
group error on (C, v, p) plus additive gyro/accel bias errors.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import expm

from .geo import GroupElement, so3_exp, so3_wedge

# WGS-84 ellipsoid and normal-gravity constants
WGS84_A = 6378137.0
WGS84_F = 1.0 / 298.257223563
WGS84_E2 = WGS84_F * (2.0 - WGS84_F)
WGS84_B = WGS84_A * (1.0 - WGS84_F)
GRAVITY_EQUATOR = 9.7803253359
GRAVITY_POLE = 9.8321849378
SOMIGLIANA_K = (WGS84_B * GRAVITY_POLE) / (WGS84_A * GRAVITY_EQUATOR) - 1.0
# m = w^2 a^2 b / GM
GRAVITY_M = 0.00344978650684

EARTH_RATE_MAG = 7.292115e-5
EARTH_RATE = np.array([0.0, 0.0, EARTH_RATE_MAG])
_EARTH_RATE_SKEW = so3_wedge(EARTH_RATE)

# DVL measurement geometry in the 5x5 embedding
H_DVL = np.zeros((3, 15))
H_DVL[:, 3:6] = -np.eye(3)
PI_PROJECT = np.zeros((3, 5))
PI_PROJECT[:, :3] = np.eye(3)
B_VECTOR = np.array([0.0, 0.0, 0.0, -1.0, 0.0])


class BelowEarthSurface(ValueError):
    """Position radius too small for the surface gravity model."""


class NonFiniteInput(ValueError):
    """NaN or inf in a state or measurement input."""


@dataclass(frozen=True)
class NavState:
    """Full navigation state: extended pose plus IMU biases."""

    pose: GroupElement
    bias_gyro: np.ndarray = field(default_factory=lambda: np.zeros(3))
    bias_accel: np.ndarray = field(default_factory=lambda: np.zeros(3))

    @property
    def rot(self):
        return self.pose.rot

    @property
    def vel(self):
        return self.pose.vel

    @property
    def pos(self):
        return self.pose.pos


@dataclass(frozen=True)
class ImuSample:
    t: float
    gyro: np.ndarray
    accel: np.ndarray


@dataclass(frozen=True)
class DvlSample:
    t: float
    vel_body: np.ndarray


def geodetic_to_ecef(lat, lon, h):
    """Geodetic latitude/longitude (rad) and height (m) to ECEF."""
    sl, cl = np.sin(lat), np.cos(lat)
    N = WGS84_A / np.sqrt(1.0 - WGS84_E2 * sl * sl)
    return np.array([
        (N + h) * cl * np.cos(lon),
        (N + h) * cl * np.sin(lon),
        (N * (1.0 - WGS84_E2) + h) * sl,
    ])


def ecef_to_geodetic(p):
    """ECEF position to geodetic (lat, lon, h) by fixed-point iteration.

    Accepts a single position (3,) or a batch (..., 3).
    """
    p = np.asarray(p, dtype=float)
    x, y, z = p[..., 0], p[..., 1], p[..., 2]
    lon = np.arctan2(y, x)
    rho = np.hypot(x, y)
    lat = np.arctan2(z, rho * (1.0 - WGS84_E2))
    h = np.zeros_like(lat)
    for _ in range(6):
        sl = np.sin(lat)
        N = WGS84_A / np.sqrt(1.0 - WGS84_E2 * sl * sl)
        h = np.where(rho > 1.0, rho / np.cos(lat) - N, np.abs(z) - WGS84_B)
        lat = np.arctan2(z, rho * (1.0 - WGS84_E2 * N / (N + h)))
    return lat, lon, h


def gravity_ecef(p):
    """Local (plumb-bob) gravity vector at an ECEF position (batchable).

    WGS-84 Somigliana normal gravity with a free-air height correction,
    pointing along the inward ellipsoidal normal.  Normal gravity already
    contains the centrifugal contribution, so the strapdown velocity
    equation needs only the explicit Coriolis term on top of this.
    """
    p = np.asarray(p, dtype=float)
    r = np.linalg.norm(p, axis=-1)
    if np.any(r <= 6.2e6):
        raise BelowEarthSurface(f"|p| = {np.min(r):.3e} m is inside the Earth")
    lat, lon, h = ecef_to_geodetic(p)
    s2 = np.sin(lat) ** 2
    gamma = GRAVITY_EQUATOR * (1.0 + SOMIGLIANA_K * s2) / np.sqrt(1.0 - WGS84_E2 * s2)
    gamma *= (
        1.0
        - 2.0 * (1.0 + WGS84_F + GRAVITY_M - 2.0 * WGS84_F * s2) * h / WGS84_A
        + 3.0 * h * h / (WGS84_A * WGS84_A)
    )
    n_up = np.stack(
        [np.cos(lat) * np.cos(lon), np.cos(lat) * np.sin(lon), np.sin(lat)], axis=-1
    )
    return -gamma[..., None] * n_up if p.ndim > 1 else -gamma * n_up


def gravitation_ecef(p):
    """Gravitational attraction: local gravity plus the centripetal term."""
    p = np.asarray(p, dtype=float)
    centripetal = np.cross(EARTH_RATE, np.cross(EARTH_RATE, p))
    return gravity_ecef(p) + centripetal


def strapdown_step(s: NavState, u: ImuSample, dt: float, gravity=None) -> NavState:
    """One first-order strapdown integration step with bias-corrected IMU.

    Attitude uses exact exponentials for the Earth-rate and body-rate
    rotations; velocity and position use the forward-Euler update that the
    trajectory synthesis inverts exactly.  Pass `gravity` to freeze the
    gravity vector instead of evaluating it at the current position.
    """
    if not (0.0 < dt <= 0.1):
        raise ValueError(f"dt = {dt!r} outside (0, 0.1]")
    if not (np.all(np.isfinite(u.gyro)) and np.all(np.isfinite(u.accel))):
        raise NonFiniteInput("non-finite IMU sample")
    w_hat = u.gyro - s.bias_gyro
    f_hat = u.accel - s.bias_accel
    rot = so3_exp(-EARTH_RATE * dt) @ s.rot @ so3_exp(w_hat * dt)
    g = gravity_ecef(s.pos) if gravity is None else np.asarray(gravity, dtype=float)
    acc = s.rot @ f_hat - 2.0 * np.cross(EARTH_RATE, s.vel) + g
    pos = s.pos + dt * s.vel
    vel = s.vel + dt * acc
    return NavState(
        pose=GroupElement(rot=rot, vel=vel, pos=pos),
        bias_gyro=s.bias_gyro,
        bias_accel=s.bias_accel,
    )


def build_F(s: NavState, gravity=None) -> np.ndarray:
    """Continuous-time 15x15 error-dynamics matrix at the current estimate.

    Rows/columns ordered (theta, v, p, bg, ba).  Gravity is treated as a
    constant vector in the linearization (pass `gravity` to pin it,
    otherwise it is evaluated at the current position).
    """
    W = _EARTH_RATE_SKEW
    C = s.rot
    v = s.vel
    p = s.pos
    g = gravity_ecef(p) if gravity is None else np.asarray(gravity, dtype=float)
    F = np.zeros((15, 15))
    F[0:3, 0:3] = -W
    F[0:3, 9:12] = C
    F[3:6, 0:3] = so3_wedge(v) @ W + so3_wedge(g)
    F[3:6, 3:6] = -2.0 * W
    F[3:6, 9:12] = so3_wedge(v) @ C
    F[3:6, 12:15] = C
    F[6:9, 0:3] = -so3_wedge(p) @ W
    F[6:9, 3:6] = np.eye(3)
    F[6:9, 9:12] = so3_wedge(p) @ C
    return F


def build_G(s: NavState) -> np.ndarray:
    """15x12 noise-input matrix for (gyro, accel, gyro-bias, accel-bias) white noise."""
    C = s.rot
    G = np.zeros((15, 12))
    G[0:3, 0:3] = C
    G[3:6, 0:3] = so3_wedge(s.vel) @ C
    G[3:6, 3:6] = C
    G[6:9, 0:3] = so3_wedge(s.pos) @ C
    G[9:12, 6:9] = np.eye(3)
    G[12:15, 9:12] = np.eye(3)
    return G


def discretize(F: np.ndarray, G: np.ndarray, Qc: np.ndarray, dt: float):
    """Van-Loan-free discretization: Phi = expm(F dt), trapezoidal Qd.

    Qd = dt/2 * (Phi G Qc G' Phi' + G Qc G'), symmetrized.
    """
    Phi = expm(F * dt)
    GQG = G @ Qc @ G.T
    Qd = 0.5 * dt * (Phi @ GQG @ Phi.T + GQG)
    return Phi, 0.5 * (Qd + Qd.T)


def dvl_embed(v_body) -> np.ndarray:
    """Embed a body-frame DVL velocity as the 5-vector (v, -1, 0)."""
    v_body = np.asarray(v_body, dtype=float)
    if not np.all(np.isfinite(v_body)):
        raise NonFiniteInput("non-finite DVL sample")
    return np.concatenate([v_body, [-1.0, 0.0]])


def augment_R(R: np.ndarray) -> np.ndarray:
    """Zero-pad a 3x3 measurement covariance to the 5x5 embedding."""
    out = np.zeros((5, 5))
    out[:3, :3] = R
    return out
