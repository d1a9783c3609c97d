"""From-scratch noise-regression network: layers, losses, training, weights IO."""

from .layers import (
    BN_EPS,
    BN_MOMENTUM,
    LEAKY_SLOPE,
    DegenerateBatch,
    MissingCache,
    ShapeMismatch,
)
from .losses import loss_huber, loss_mse
from .network import (
    DROPOUT_P,
    IN_CHANNELS,
    N_OUT,
    Q_FLOOR,
    SHAPES,
    TRAINABLE,
    WINDOW,
    NetworkWeights,
    init_weights,
    network_backward,
    network_forward,
    network_forward_cached,
    predict_variances,
)
from .serialize import FormatError, VersionError, weights_load, weights_save
from .training import EmptyDataset, TrainConfig, adam_init, adam_step, train

__all__ = [
    "BN_EPS", "BN_MOMENTUM", "LEAKY_SLOPE", "DROPOUT_P", "Q_FLOOR",
    "IN_CHANNELS", "WINDOW", "N_OUT", "SHAPES", "TRAINABLE",
    "DegenerateBatch", "MissingCache", "ShapeMismatch",
    "FormatError", "VersionError", "EmptyDataset",
    "NetworkWeights", "TrainConfig",
    "init_weights", "network_forward", "network_forward_cached",
    "network_backward", "predict_variances",
    "loss_mse", "loss_huber",
    "adam_init", "adam_step", "train",
    "weights_save", "weights_load",
]
