"""Stacked-LSTM window-energy regressor: hand-rolled forward/backward (BPTT),
MAE loss, SGD/Adam optimizers, local training loop and checkpoint I/O."""

from .model import (
    ModelConfig,
    ModelParameters,
    backward,
    forward,
    init_params,
    mae_loss,
    param_count,
)
from .optim import OptimizerState, adam_step, sgd_step
from .train import Hyperparams, train_local
from .checkpoint import load_params, save_params, write_loss_trace

__all__ = [
    "ModelConfig",
    "ModelParameters",
    "OptimizerState",
    "Hyperparams",
    "param_count",
    "init_params",
    "forward",
    "backward",
    "mae_loss",
    "sgd_step",
    "adam_step",
    "train_local",
    "save_params",
    "load_params",
    "write_loss_trace",
]
