"""SGD and Adam parameter updates with coupled L2 weight decay.

Both optimizers apply the effective gradient g = grad + weight_decay * w.
Adam uses the standard bias-corrected moment estimates with
w' = w - lr * m_hat / (sqrt(v_hat) + eps).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

OPTIMIZER_KINDS = ("sgd", "adam")


@dataclass
class OptimizerState:
    kind: str
    lr: float
    weight_decay: float = 0.0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    t: int = 0
    m: np.ndarray | None = None
    v: np.ndarray | None = None

    def __post_init__(self):
        if self.kind not in OPTIMIZER_KINDS:
            raise ValueError(f"optimizer kind must be one of {OPTIMIZER_KINDS}, got {self.kind!r}")
        if self.lr <= 0.0 or self.weight_decay < 0.0:
            raise ValueError("lr must be positive and weight_decay non-negative")

    def step(self, w: np.ndarray, grad: np.ndarray) -> np.ndarray:
        if self.kind == "sgd":
            return sgd_step(w, grad, self)
        w_next, _ = adam_step(w, grad, self)
        return w_next


def _check_grad(w: np.ndarray, grad: np.ndarray) -> None:
    if grad.shape != w.shape:
        raise ValueError(f"gradient shape {grad.shape} does not match parameters {w.shape}")
    if not np.all(np.isfinite(grad)):
        bad = np.flatnonzero(~np.isfinite(grad))
        raise ValueError(
            f"non-finite gradient: {bad.size} coordinate(s), first at index {bad[0]}"
        )


def sgd_step(w: np.ndarray, grad: np.ndarray, state: OptimizerState) -> np.ndarray:
    """w' = w - lr * (grad + weight_decay * w)."""
    _check_grad(w, grad)
    g = grad + state.weight_decay * w if state.weight_decay else grad
    return w - state.lr * g


def adam_step(w: np.ndarray, grad: np.ndarray, state: OptimizerState):
    """Bias-corrected Adam update; mutates and returns the moment state."""
    _check_grad(w, grad)
    if state.m is None:
        state.m = np.zeros_like(w)
        state.v = np.zeros_like(w)
    g = grad + state.weight_decay * w if state.weight_decay else grad
    state.t += 1
    state.m *= state.beta1
    state.m += (1.0 - state.beta1) * g
    state.v *= state.beta2
    state.v += (1.0 - state.beta2) * g * g
    m_hat = state.m / (1.0 - state.beta1**state.t)
    v_hat = state.v / (1.0 - state.beta2**state.t)
    return w - state.lr * m_hat / (np.sqrt(v_hat) + state.eps), state
