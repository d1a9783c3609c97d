"""Primitive layers with explicit forward/backward passes.

Every forward returns (output, cache); the matching backward consumes the
cache and the upstream gradient and returns input/parameter gradients.
All layers are shape-generic; dtype follows the inputs, so the same code
runs float32 for training and float64 for finite-difference checks.
"""

from __future__ import annotations

import numpy as np

LEAKY_SLOPE = 0.01
BN_EPS = 1e-5
BN_MOMENTUM = 0.1


class ShapeMismatch(ValueError):
    """An array did not have the shape a layer requires."""


class DegenerateBatch(ValueError):
    """Train-mode batch statistics need at least two samples."""


class MissingCache(RuntimeError):
    """A backward pass was invoked without its forward cache."""


def _require_cache(cache):
    if cache is None:
        raise MissingCache("backward called without the forward cache")
    return cache


# ------------------------------------------------------------------ conv1d

def conv1d_forward(x: np.ndarray, kernel: np.ndarray, bias: np.ndarray):
    """Cross-correlate (B, Cin, W) with (Cout, Cin, K), zero padding K//2.

    Stride 1 and symmetric padding keep the output width equal to W.
    """
    if x.ndim != 3:
        raise ShapeMismatch(f"conv input must be (B, Cin, W), got {x.shape}")
    B, Cin, W = x.shape
    Cout, Ck, K = kernel.shape
    if Ck != Cin:
        raise ShapeMismatch(f"kernel expects {Ck} input channels, input has {Cin}")
    if bias.shape != (Cout,):
        raise ShapeMismatch(f"bias shape {bias.shape} != ({Cout},)")
    pad = K // 2
    xp = np.zeros((B, Cin, W + 2 * pad), dtype=x.dtype)
    xp[:, :, pad:pad + W] = x
    # (B, Cin, W, K) windows -> one GEMM over flattened (batch*position) rows
    windows = np.lib.stride_tricks.sliding_window_view(xp, K, axis=2)
    cols = np.ascontiguousarray(windows.transpose(0, 2, 1, 3)).reshape(B * W, Cin * K)
    kmat = kernel.reshape(Cout, Cin * K)
    out = (cols @ kmat.T + bias).reshape(B, W, Cout).transpose(0, 2, 1)
    cache = (cols, kmat, (B, Cin, W, K, pad), kernel.shape)
    return np.ascontiguousarray(out), cache


def conv1d_backward(d_out: np.ndarray, cache):
    cols, kmat, (B, Cin, W, K, pad), kshape = _require_cache(cache)
    dflat = np.ascontiguousarray(d_out.transpose(0, 2, 1)).reshape(B * W, -1)
    d_kernel = (dflat.T @ cols).reshape(kshape)
    d_bias = dflat.sum(axis=0)
    d_cols = (dflat @ kmat).reshape(B, W, Cin, K).transpose(0, 2, 1, 3)
    d_xp = np.zeros((B, Cin, W + 2 * pad), dtype=d_out.dtype)
    for t in range(K):
        d_xp[:, :, t:t + W] += d_cols[:, :, :, t]
    return d_xp[:, :, pad:pad + W], d_kernel, d_bias


# -------------------------------------------------------------- batch norm

def batchnorm_forward(x: np.ndarray, gamma, beta, running_mean, running_var,
                      mode: str, eps: float = BN_EPS, momentum: float = BN_MOMENTUM):
    """Per-channel normalization of (B, C, W) or (B, C) activations.

    Train mode normalizes with batch statistics over every non-channel axis
    and updates the running statistics in place (unbiased variance, like the
    usual deep-learning convention).  Eval mode uses the running statistics.
    """
    axes = (0,) if x.ndim == 2 else (0, 2)
    shape = (1, -1) if x.ndim == 2 else (1, -1, 1)
    if mode == "train":
        n = x.shape[0] * (1 if x.ndim == 2 else x.shape[2])
        if x.shape[0] < 2:
            raise DegenerateBatch("batch norm in train mode needs batch >= 2")
        mean = x.mean(axis=axes)
        var = x.var(axis=axes)
        ivar = 1.0 / np.sqrt(var + eps)
        xhat = (x - mean.reshape(shape)) * ivar.reshape(shape)
        unbiased = var * (n / max(n - 1, 1))
        running_mean *= 1.0 - momentum
        running_mean += momentum * mean
        running_var *= 1.0 - momentum
        running_var += momentum * unbiased
        cache = (xhat, gamma, ivar, axes, shape)
    elif mode == "eval":
        ivar = 1.0 / np.sqrt(running_var + eps)
        xhat = (x - running_mean.reshape(shape)) * ivar.reshape(shape)
        cache = None  # eval backward unsupported (inference only)
    else:
        raise ValueError(f"mode must be 'train' or 'eval', got {mode!r}")
    out = gamma.reshape(shape) * xhat + beta.reshape(shape)
    return out, cache


def batchnorm_backward(d_out: np.ndarray, cache):
    xhat, gamma, ivar, axes, shape = _require_cache(cache)
    n = d_out.shape[0] * (1 if d_out.ndim == 2 else d_out.shape[2])
    d_gamma = (d_out * xhat).sum(axis=axes)
    d_beta = d_out.sum(axis=axes)
    g = gamma.reshape(shape) * ivar.reshape(shape)
    d_x = g * (d_out
               - (d_beta / n).reshape(shape)
               - xhat * (d_gamma / n).reshape(shape))
    return d_x, d_gamma, d_beta


# -------------------------------------------------------------- leaky relu

def leaky_relu_forward(x: np.ndarray, slope: float = LEAKY_SLOPE):
    out = np.where(x >= 0, x, slope * x)
    return out, (x >= 0, slope)


def leaky_relu_backward(d_out: np.ndarray, cache):
    positive, slope = _require_cache(cache)
    return np.where(positive, d_out, slope * d_out)


# ----------------------------------------------------------------- dropout

def dropout_forward(x: np.ndarray, p: float, mode: str, rng=None):
    """Inverted dropout: train-mode activations are scaled by 1/(1-p)."""
    if mode != "train" or p == 0.0:
        return x, None
    if rng is None:
        raise ValueError("train-mode dropout needs an rng")
    mask = (rng.random(x.shape) >= p).astype(x.dtype) / (1.0 - p)
    return x * mask, mask


def dropout_backward(d_out: np.ndarray, cache):
    if cache is None:          # eval mode or p=0: identity
        return d_out
    return d_out * cache


# ------------------------------------------------------------ pooling / fc

def mean_pool_forward(x: np.ndarray):
    """Average over the temporal axis: (B, C, W) -> (B, C)."""
    return x.mean(axis=2), (x.shape,)


def mean_pool_backward(d_out: np.ndarray, cache):
    (shape,) = _require_cache(cache)
    W = shape[2]
    return np.broadcast_to(d_out[:, :, None] / W, shape).astype(d_out.dtype).copy()


def linear_forward(x: np.ndarray, weight: np.ndarray, bias: np.ndarray):
    """Affine map (B, Fin) -> (B, Fout) with weight shaped (Fout, Fin)."""
    if x.shape[1] != weight.shape[1]:
        raise ShapeMismatch(f"linear input {x.shape} vs weight {weight.shape}")
    return x @ weight.T + bias, (x, weight)


def linear_backward(d_out: np.ndarray, cache):
    x, weight = _require_cache(cache)
    return d_out @ weight, d_out.T @ x, d_out.sum(axis=0)


# ---------------------------------------------------------------- softplus

def softplus_forward(x: np.ndarray):
    out = np.log1p(np.exp(-np.abs(x))) + np.maximum(x, 0.0)
    return out, (x,)


def softplus_backward(d_out: np.ndarray, cache):
    (x,) = _require_cache(cache)
    # sigmoid via exp of a non-positive argument only (no overflow)
    z = np.exp(-np.abs(x))
    sig = np.where(x >= 0, 1.0 / (1.0 + z), z / (1.0 + z))
    return d_out * sig
