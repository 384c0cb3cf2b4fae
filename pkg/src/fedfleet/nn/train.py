"""Local training loop: seeded shuffles, count-based batching, one optimizer
step per batch per epoch, per-epoch mean MAE trace."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import ModelParameters, backward, forward, mae_loss
from .optim import OPTIMIZER_KINDS, OptimizerState


@dataclass(frozen=True)
class Hyperparams:
    """Local training knobs. batch_count partitions the dataset into a fixed
    number of batches, so the batch size ceil(n / batch_count) varies with the
    client's data volume."""

    batch_count: int = 5
    epochs: int = 100
    lr: float = 1e-3
    weight_decay: float = 1e-5

    def __post_init__(self):
        if self.batch_count < 1 or self.epochs < 0:
            raise ValueError("batch_count must be >= 1 and epochs >= 0")
        if self.lr <= 0.0 or self.weight_decay < 0.0:
            raise ValueError("lr must be positive and weight_decay non-negative")


def train_local(
    params: ModelParameters,
    features: np.ndarray,
    labels: np.ndarray,
    hyper: Hyperparams,
    optimizer: str = "adam",
    seed: int = 0,
    dtype=np.float32,
) -> tuple[ModelParameters, list[float]]:
    """Train a copy of ``params`` on scaled (features, labels).

    features: (n, m, input_dim) scaled windows; labels: (n,) scaled energies.
    Returns the trained parameters and the per-epoch mean training MAE.
    Deterministic in (params, data, seed). ``dtype`` selects the compute
    precision of the heavy tensor math; parameters stay float64 at rest.
    """
    features = np.asarray(features, dtype=dtype)
    labels = np.asarray(labels, dtype=dtype)
    n = len(features)
    if n == 0:
        raise ValueError("training set is empty")
    if len(labels) != n:
        raise ValueError("features and labels disagree on sample count")
    if optimizer not in OPTIMIZER_KINDS:
        raise ValueError(f"optimizer must be one of {OPTIMIZER_KINDS}, got {optimizer!r}")

    params = params.copy()
    state = OptimizerState(kind=optimizer, lr=hyper.lr, weight_decay=hyper.weight_decay)
    rng = np.random.default_rng(seed)
    trace: list[float] = []
    for _ in range(hyper.epochs):
        perm = rng.permutation(n)
        epoch_losses = []
        for idx in np.array_split(perm, hyper.batch_count):
            if idx.size == 0:
                continue
            yhat, cache = forward(params, features[idx], mode="train", rng=rng, dtype=dtype)
            losses, dloss = mae_loss(yhat, labels[idx])
            grad = backward(cache, dloss / idx.size)
            params.flat = state.step(params.flat, grad)
            epoch_losses.append(float(np.mean(losses)))
        trace.append(float(np.mean(epoch_losses)))
    return params, trace
