"""Adam updates and the best-checkpoint / early-stopping policy."""
from __future__ import annotations

import enum
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ShapeError

log = logging.getLogger(__name__)


@dataclass
class AdamState:
    lr: float = 0.001
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-7
    t: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)


def adam_step(params: dict, grads: dict, state: AdamState) -> dict:
    """One bias-corrected Adam update, applied to ``params`` in place.

    Parameters missing from ``grads`` are treated as having zero gradient.
    """
    for name, g in grads.items():
        if name not in params:
            raise ShapeError(f"gradient for unknown parameter {name!r}")
        if np.shape(g) != params[name].shape:
            raise ShapeError(f"{name}: gradient shape {np.shape(g)} != {params[name].shape}")
    state.t += 1
    c1 = 1.0 - state.beta1 ** state.t
    c2 = 1.0 - state.beta2 ** state.t
    for name, theta in params.items():
        if name not in state.m:
            state.m[name] = np.zeros_like(theta)
            state.v[name] = np.zeros_like(theta)
        m, v = state.m[name], state.v[name]
        g = grads.get(name)
        m *= state.beta1
        v *= state.beta2
        if g is not None:
            g = np.asarray(g, dtype=theta.dtype)
            m += (1.0 - state.beta1) * g
            v += (1.0 - state.beta2) * (g * g)
        theta -= state.lr * (m / c1) / (np.sqrt(v / c2) + state.eps)
    return params


class Decision(enum.Enum):
    CONTINUE = "continue"
    STOP = "stop"


@dataclass
class EarlyStopState:
    patience: int = 9
    best_loss: float = math.inf
    best_epoch: int = 0
    epochs_since_improvement: int = 0
    best_params_snapshot: dict | None = None


def early_stop_update(state: EarlyStopState, epoch: int, val_loss: float,
                      current_params: dict) -> Decision:
    """Record one epoch's validation loss; STOP after ``patience`` epochs without a new minimum."""
    if math.isnan(val_loss):
        log.warning("epoch %d: validation loss is NaN, counted as no improvement", epoch)
    if not math.isnan(val_loss) and val_loss < state.best_loss:
        state.best_loss = val_loss
        state.best_epoch = epoch
        state.epochs_since_improvement = 0
        state.best_params_snapshot = {k: np.array(v, copy=True) for k, v in current_params.items()}
        return Decision.CONTINUE
    state.epochs_since_improvement += 1
    if state.epochs_since_improvement >= state.patience:
        return Decision.STOP
    return Decision.CONTINUE
