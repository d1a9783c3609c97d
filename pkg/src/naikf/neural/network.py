"""Noise-regression network: three conv blocks, mean pooling, three FC layers.

The network maps a (6, 100) IMU window (gyro rows then accel rows) to six
positive noise variances.  Outputs live in a per-channel scaled space; the
`target_scale` tensor converts them to physical variance units.  Forward
and backward passes are composed from the primitives in `layers`.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .layers import (
    BN_EPS,
    BN_MOMENTUM,
    LEAKY_SLOPE,
    DegenerateBatch,  # noqa: F401  (re-export for callers)
    MissingCache,
    ShapeMismatch,
    batchnorm_backward,
    batchnorm_forward,
    conv1d_backward,
    conv1d_forward,
    dropout_backward,
    dropout_forward,
    leaky_relu_backward,
    leaky_relu_forward,
    linear_backward,
    linear_forward,
    mean_pool_backward,
    mean_pool_forward,
    softplus_backward,
    softplus_forward,
)

IN_CHANNELS = 6
WINDOW = 100
N_OUT = 6
Q_FLOOR = 1e-12
DROPOUT_P = 0.2

# name -> shape; the five trailing BN/stat tensors per block are not trained
SHAPES = {
    "conv1_k": (32, 6, 5), "conv1_b": (32,),
    "bn1_gamma": (32,), "bn1_beta": (32,), "bn1_mean": (32,), "bn1_var": (32,),
    "conv2_k": (64, 32, 5), "conv2_b": (64,),
    "bn2_gamma": (64,), "bn2_beta": (64,), "bn2_mean": (64,), "bn2_var": (64,),
    "conv3_k": (128, 64, 5), "conv3_b": (128,),
    "bn3_gamma": (128,), "bn3_beta": (128,), "bn3_mean": (128,), "bn3_var": (128,),
    "fc1_w": (64, 128), "fc1_b": (64,),
    "fc2_w": (64, 64), "fc2_b": (64,),
    "fc3_w": (6, 64), "fc3_b": (6,),
    "target_scale": (6,),
}

TRAINABLE = tuple(
    n for n in SHAPES
    if not n.endswith(("_mean", "_var")) and n != "target_scale"
)


@dataclass
class NetworkWeights:
    """All parameter tensors plus run metadata (hyperparameters, provenance)."""

    tensors: dict
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        missing = set(SHAPES) - set(self.tensors)
        extra = set(self.tensors) - set(SHAPES)
        if missing or extra:
            raise ShapeMismatch(f"missing tensors {sorted(missing)}, "
                                f"unexpected {sorted(extra)}")
        for name, shape in SHAPES.items():
            got = self.tensors[name].shape
            if got != shape:
                raise ShapeMismatch(f"{name}: shape {got} != {shape}")
        for name in ("bn1_var", "bn2_var", "bn3_var"):
            if not np.all(self.tensors[name] > 0):
                raise ValueError(f"{name} must stay positive")
        if not np.all(self.tensors["target_scale"] > 0):
            raise ValueError("target_scale must be positive")

    def __getitem__(self, name):
        return self.tensors[name]

    def astype(self, dtype) -> "NetworkWeights":
        return NetworkWeights(
            tensors={k: v.astype(dtype) for k, v in self.tensors.items()},
            meta=dict(self.meta),
        )

    def copy(self) -> "NetworkWeights":
        return NetworkWeights(
            tensors={k: v.copy() for k, v in self.tensors.items()},
            meta=dict(self.meta),
        )


def init_weights(seed: int = 0, dtype=np.float32) -> NetworkWeights:
    """He-normal kernels, zero biases, unit batch-norm scale and variance."""
    rng = np.random.default_rng(seed)
    t = {}
    for name, shape in SHAPES.items():
        if name.endswith(("_k", "_w")):
            fan_in = int(np.prod(shape[1:]))
            t[name] = rng.normal(0.0, np.sqrt(2.0 / fan_in), size=shape)
        elif name.endswith(("_gamma", "_var")) or name == "target_scale":
            t[name] = np.ones(shape)
        else:
            t[name] = np.zeros(shape)
    return NetworkWeights(
        tensors={k: v.astype(dtype) for k, v in t.items()},
        meta={"seed": seed, "bn_eps": BN_EPS, "bn_momentum": BN_MOMENTUM,
              "leaky_slope": LEAKY_SLOPE, "dropout_p": DROPOUT_P,
              "q_floor": Q_FLOOR},
    )


def _check_input(x):
    x = np.asarray(x)
    if x.ndim == 2:
        x = x[None]
    if x.ndim != 3 or x.shape[1] != IN_CHANNELS or x.shape[2] != WINDOW:
        raise ShapeMismatch(
            f"expected (B, {IN_CHANNELS}, {WINDOW}) windows, got {x.shape}")
    return x


def network_forward_cached(x, w: NetworkWeights, mode: str = "eval", rng=None,
                           dropout_p: float = DROPOUT_P):
    """Full forward pass; returns (scaled outputs (B, 6), layer caches)."""
    x = _check_input(x)
    t = w.tensors
    caches = []
    h = x
    for i in (1, 2, 3):
        h, c = conv1d_forward(h, t[f"conv{i}_k"], t[f"conv{i}_b"])
        caches.append(("conv", i, c))
        h, c = batchnorm_forward(h, t[f"bn{i}_gamma"], t[f"bn{i}_beta"],
                                 t[f"bn{i}_mean"], t[f"bn{i}_var"], mode)
        caches.append(("bn", i, c))
        h, c = leaky_relu_forward(h)
        caches.append(("relu", i, c))
    h, c = mean_pool_forward(h)
    caches.append(("pool", 0, c))
    for i in (1, 2):
        h, c = linear_forward(h, t[f"fc{i}_w"], t[f"fc{i}_b"])
        caches.append(("fc", i, c))
        h, c = leaky_relu_forward(h)
        caches.append(("relu", 10 + i, c))
        h, c = dropout_forward(h, dropout_p, mode, rng)
        caches.append(("dropout", i, c))
    h, c = linear_forward(h, t["fc3_w"], t["fc3_b"])
    caches.append(("fc", 3, c))
    h, c = softplus_forward(h)
    caches.append(("softplus", 0, c))
    return h + Q_FLOOR, caches


def network_forward(x, w: NetworkWeights, mode: str = "eval", rng=None):
    """Scaled-space noise variances, shape (B, 6); strictly positive."""
    out, _ = network_forward_cached(x, w, mode=mode, rng=rng)
    return out


def predict_variances(x, w: NetworkWeights) -> np.ndarray:
    """Physical-unit variances: eval-mode outputs times the target scale."""
    return network_forward(x, w, mode="eval") * w["target_scale"]


def network_backward(caches, w: NetworkWeights, d_out: np.ndarray) -> dict:
    """Gradients w.r.t. every trainable tensor given d(loss)/d(scaled output)."""
    if caches is None:
        raise MissingCache("network_backward needs the forward caches")
    grads = {}
    g = np.asarray(d_out)
    for kind, i, cache in reversed(caches):
        if kind == "softplus":
            g = softplus_backward(g, cache)
        elif kind == "fc":
            g, dW, db = linear_backward(g, cache)
            grads[f"fc{i}_w"] = dW
            grads[f"fc{i}_b"] = db
        elif kind == "dropout":
            g = dropout_backward(g, cache)
        elif kind == "relu":
            g = leaky_relu_backward(g, cache)
        elif kind == "pool":
            g = mean_pool_backward(g, cache)
        elif kind == "bn":
            g, dgamma, dbeta = batchnorm_backward(g, cache)
            grads[f"bn{i}_gamma"] = dgamma
            grads[f"bn{i}_beta"] = dbeta
        elif kind == "conv":
            g, dK, db = conv1d_backward(g, cache)
            grads[f"conv{i}_k"] = dK
            grads[f"conv{i}_b"] = db
        else:  # pragma: no cover
            raise RuntimeError(f"unknown cache entry {kind}")
    return grads
