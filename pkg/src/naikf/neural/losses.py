"""Regression losses returning (scalar, gradient w.r.t. predictions)."""

from __future__ import annotations

import numpy as np


def loss_mse(pred: np.ndarray, target: np.ndarray):
    """Mean over samples of the squared error norm: (1/N) sum ||e||^2."""
    e = pred - target
    n = pred.shape[0]
    return float((e * e).sum() / n), 2.0 * e / n


def loss_huber(pred: np.ndarray, target: np.ndarray, delta: float = 1.0):
    """Elementwise Huber penalty averaged over samples and dimensions.

    Quadratic inside |e| <= delta, linear with slope delta outside; the two
    branches agree at the knee.
    """
    if delta <= 0:
        raise ValueError("delta must be positive")
    e = pred - target
    a = np.abs(e)
    quad = a <= delta
    per = np.where(quad, 0.5 * e * e, delta * (a - 0.5 * delta))
    denom = e.size
    grad = np.where(quad, e, delta * np.sign(e)) / denom
    return float(per.sum() / denom), grad
