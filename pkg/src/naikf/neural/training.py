"""Adam optimizer and the minibatch training loop for the noise regressor.

Targets are conditioned by per-channel scale constants (the dataset-wide
median of each variance channel) so that all six channels contribute at
comparable magnitude; the constants are stored in the weight object and
applied at inference time.  Training runs in float32.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .losses import loss_huber, loss_mse
from .network import (
    TRAINABLE,
    NetworkWeights,
    init_weights,
    network_backward,
    network_forward_cached,
)


class EmptyDataset(ValueError):
    pass


@dataclass
class TrainConfig:
    loss: str = "mse"            # mse | huber
    huber_delta: float = 1.0     # knee in scaled-target units
    epochs: int = 40
    lr: float = 1e-3
    dropout_p: float = 0.2
    batch_size: int = 64
    seed: int = 0
    step: int = 10               # window stride the dataset was built with

    def __post_init__(self):
        if self.loss not in ("mse", "huber"):
            raise ValueError(f"unknown loss {self.loss!r}")
        if self.huber_delta <= 0:
            raise ValueError("huber_delta must be positive")
        if self.epochs < 1 or self.batch_size < 2:
            raise ValueError("need epochs >= 1 and batch_size >= 2")


def adam_init(w: NetworkWeights) -> dict:
    return {
        "m": {n: np.zeros_like(w[n]) for n in TRAINABLE},
        "v": {n: np.zeros_like(w[n]) for n in TRAINABLE},
        "t": 0,
    }


def adam_step(w: NetworkWeights, grads: dict, state: dict, lr: float = 1e-3,
              beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
    """One Adam update, in place on the weight tensors."""
    state["t"] += 1
    t = state["t"]
    bc1 = 1.0 - beta1 ** t
    bc2 = 1.0 - beta2 ** t
    for name in TRAINABLE:
        g = grads[name]
        m = state["m"][name]
        v = state["v"][name]
        m *= beta1
        m += (1.0 - beta1) * g
        v *= beta2
        v += (1.0 - beta2) * g * g
        w.tensors[name] -= (lr * (m / bc1) / (np.sqrt(v / bc2) + eps)).astype(
            w.tensors[name].dtype)
    return w, state


def target_scale_from(y: np.ndarray) -> np.ndarray:
    """Per-channel median of the variance targets; unit scale for dead channels."""
    scale = np.median(np.asarray(y, dtype=float), axis=0)
    scale[scale <= 0] = 1.0
    return scale


def train(X: np.ndarray, y: np.ndarray, cfg: TrainConfig):
    """Train from scratch; returns (weights, per-epoch mean loss).

    Deterministic for a given config: one master generator drives
    initialization, epoch shuffles, and dropout masks in a fixed order.
    """
    X = np.asarray(X, dtype=np.float32)
    y = np.asarray(y, dtype=float)
    if len(X) == 0:
        raise EmptyDataset("no training windows")
    if len(X) != len(y):
        raise ValueError(f"{len(X)} windows vs {len(y)} targets")

    scale = target_scale_from(y)
    y_scaled = (y / scale).astype(np.float32)

    w = init_weights(seed=cfg.seed, dtype=np.float32)
    w.tensors["target_scale"] = scale.astype(np.float32)
    w.meta.update(loss=cfg.loss, huber_delta=cfg.huber_delta, epochs=cfg.epochs,
                  lr=cfg.lr, dropout_p=cfg.dropout_p, batch_size=cfg.batch_size,
                  step=cfg.step, n_train=len(X))
    state = adam_init(w)
    rng = np.random.default_rng(np.random.SeedSequence((cfg.seed, 0xA11)))

    losses = []
    n = len(X)
    for _epoch in range(cfg.epochs):
        order = rng.permutation(n)
        batch_losses = []
        for start in range(0, n, cfg.batch_size):
            idx = order[start:start + cfg.batch_size]
            if len(idx) < 2:
                continue  # batch norm needs >= 2 samples
            pred, caches = network_forward_cached(
                X[idx], w, mode="train", rng=rng, dropout_p=cfg.dropout_p)
            if cfg.loss == "mse":
                value, grad = loss_mse(pred, y_scaled[idx])
            else:
                value, grad = loss_huber(pred, y_scaled[idx], cfg.huber_delta)
            grads = network_backward(caches, w, grad.astype(np.float32))
            adam_step(w, grads, state, lr=cfg.lr)
            batch_losses.append(value)
        losses.append(float(np.mean(batch_losses)))
    return w, np.array(losses)
