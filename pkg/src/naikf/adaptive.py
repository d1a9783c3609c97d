"""Innovation-driven process-noise estimation and the neural/innovation blend.

The estimators turn a sliding window of filter corrections into a process
noise covariance: the windowed second moment of the corrections is the
adapted Q.  The same formula serves the group-retraction filter (whose
corrections live in the Lie algebra) and the additive filter (whose
corrections are plain state deltas); they differ only in what is pushed
into the buffer.  `hybrid_Q` mixes a network-predicted continuous-time
noise diagonal, mapped through the noise-input Jacobian and discretized
with the same trapezoid as the base covariance, against the windowed
estimate with a fixed blend weight.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "BufferNotFull",
    "BlendConfig",
    "NoiseParams",
    "InnovBuffer",
    "q_innov_invariant",
    "q_innov_euclidean",
    "q_innov_full",
    "clamp_psd",
    "nn_process_diag",
    "hybrid_Q",
]


class BufferNotFull(RuntimeError):
    """An estimate was requested before the correction window filled."""


def _triad(value) -> np.ndarray:
    out = np.broadcast_to(np.asarray(value, dtype=float), (3,)).copy()
    if np.any(out < 0):
        raise ValueError("noise variances must be non-negative")
    return out


@dataclass(frozen=True)
class BlendConfig:
    """Blend weight plus the fixed bias-noise variances.

    `lambda_blend` weights the network term; `1 - lambda_blend` weights the
    innovation term.  Bias random-walk variances are calibration constants,
    scalar (isotropic) or per-axis.
    """

    lambda_blend: float = 0.6
    q_bias_gyro: np.ndarray = field(default_factory=lambda: _triad(1e-12))
    q_bias_accel: np.ndarray = field(default_factory=lambda: _triad(1e-8))

    def __post_init__(self):
        if not (0.0 <= self.lambda_blend <= 1.0):
            raise ValueError(f"lambda_blend {self.lambda_blend} outside [0, 1]")
        object.__setattr__(self, "q_bias_gyro", _triad(self.q_bias_gyro))
        object.__setattr__(self, "q_bias_accel", _triad(self.q_bias_accel))


@dataclass(frozen=True)
class NoiseParams:
    """Six learned continuous-time sensor noise variances, gyro then accel."""

    q: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.q, dtype=float)
        if arr.shape != (6,):
            raise ValueError(f"expected 6 variances, got shape {arr.shape}")
        if not np.all(arr > 0):
            raise ValueError("noise variances must be positive")
        object.__setattr__(self, "q", arr)


class InnovBuffer:
    """Fixed-capacity FIFO of correction vectors (oldest evicted first)."""

    def __init__(self, capacity: int):
        if capacity < 1:
            raise ValueError("capacity must be at least 1")
        self.capacity = int(capacity)
        self._buf: deque[np.ndarray] = deque(maxlen=self.capacity)

    def push(self, correction) -> None:
        v = np.asarray(correction, dtype=float).reshape(-1)
        if self._buf and v.shape != self._buf[0].shape:
            raise ValueError(
                f"correction dim {v.shape[0]} != buffered {self._buf[0].shape[0]}")
        self._buf.append(v)

    def __len__(self) -> int:
        return len(self._buf)

    @property
    def full(self) -> bool:
        return len(self._buf) == self.capacity

    def corrections(self) -> np.ndarray:
        """The buffered corrections as an (n, dim) array, oldest first."""
        return np.stack(self._buf)

    def clear(self) -> None:
        self._buf.clear()


def _second_moment(buf: InnovBuffer) -> np.ndarray:
    if not buf.full:
        raise BufferNotFull(f"{len(buf)} of {buf.capacity} corrections buffered")
    V = buf.corrections()
    return (V.T @ V) / buf.capacity


def q_innov_invariant(buf: InnovBuffer) -> np.ndarray:
    """Windowed second moment of group-retraction corrections K r.

    Returns (1/N) sum_j nu_j nu_j^T over the full buffer; symmetric PSD by
    construction.
    """
    return _second_moment(buf)


def q_innov_euclidean(buf: InnovBuffer) -> np.ndarray:
    """Same windowed second moment, fed by additive-filter corrections."""
    return _second_moment(buf)


def q_innov_full(buf: InnovBuffer, P_post: np.ndarray, Phi: np.ndarray,
                 P_prev: np.ndarray) -> np.ndarray:
    """Second-moment estimate plus the covariance-recursion correction terms.

    Adds P_post - Phi P_prev Phi^T to the windowed second moment.  The
    result can be indefinite; callers that need PSD apply `clamp_psd`.
    """
    Q = _second_moment(buf) + P_post - Phi @ P_prev @ Phi.T
    return 0.5 * (Q + Q.T)


def clamp_psd(M: np.ndarray, floor: float = 0.0) -> np.ndarray:
    """Nearest symmetric matrix with eigenvalues >= floor."""
    sym = 0.5 * (M + M.T)
    vals, vecs = np.linalg.eigh(sym)
    vals = np.maximum(vals, floor)
    out = (vecs * vals) @ vecs.T
    return 0.5 * (out + out.T)


def nn_process_diag(nn_q: NoiseParams, cfg: BlendConfig) -> np.ndarray:
    """The 12 noise-input variances: learned sensor terms then fixed bias terms."""
    return np.concatenate([nn_q.q, cfg.q_bias_gyro, cfg.q_bias_accel])


def hybrid_Q(nn_q: NoiseParams, q_innov: np.ndarray, G: np.ndarray,
             cfg: BlendConfig, dt: float, Phi: np.ndarray | None = None) -> np.ndarray:
    """Blend the network noise model against the innovation estimate.

    The network diagonal is mapped through the noise-input Jacobian G and
    discretized over dt with the trapezoid rule (pass the state transition
    Phi to match the propagation discretization; omit it for the Euler
    endpoint).  Weights are `lambda_blend` on the network term and
    `1 - lambda_blend` on the innovation term, so the endpoints reduce to
    the pure single-source covariances.
    """
    Qc = np.diag(nn_process_diag(nn_q, cfg))
    M = G @ Qc @ G.T
    if Phi is None:
        Qd_nn = dt * M
    else:
        Qd_nn = 0.5 * dt * (Phi @ M @ Phi.T + M)
    out = cfg.lambda_blend * Qd_nn + (1.0 - cfg.lambda_blend) * q_innov
    return 0.5 * (out + out.T)
