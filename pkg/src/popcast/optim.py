"""Adam with coupled L2 penalty plus a reduce-on-plateau LR scheduler."""

import math

import numpy as np

from .autodiff import snap_f32
from .errors import ConfigError, NumericalError


class AdamState:
    """Moment buffers and hyperparameters for one parameter set.

    Buffers are keyed by parameter name so state survives independently of
    tensor identity.
    """

    def __init__(self, params, lr: float = 1e-3, beta1: float = 0.9,
                 beta2: float = 0.999, eps: float = 1e-8, l2: float = 1e-3):
        if lr <= 0:
            raise ConfigError(f"learning rate must be positive, got {lr}")
        if not 0 <= beta1 < 1 or not 0 <= beta2 < 1:
            raise ConfigError(f"betas must lie in [0, 1), got {beta1}, {beta2}")
        self.lr = float(lr)
        self.beta1 = float(beta1)
        self.beta2 = float(beta2)
        self.eps = float(eps)
        self.l2 = float(l2)
        self.step_count = 0
        self.m = {name: np.zeros_like(t.data) for name, t in params.items()}
        self.v = {name: np.zeros_like(t.data) for name, t in params.items()}


def adam_step(params, state: AdamState) -> None:
    """One bias-corrected Adam update, in place.

    The L2 penalty is coupled: it enters the gradient before the moment
    updates. Updated values are snapped to float32-representable doubles
    so checkpoints round-trip exactly.
    """
    state.step_count += 1
    t = state.step_count
    bc1 = 1.0 - state.beta1 ** t
    bc2 = 1.0 - state.beta2 ** t
    for name, param in params.items():
        if name not in state.m:
            raise ValueError(f"parameter {name!r} unknown to this optimizer state")
        if param.grad is None:
            raise ValueError(f"parameter {name!r} has no gradient; run backward first")
        if not np.all(np.isfinite(param.grad)):
            raise NumericalError(f"non-finite gradient in parameter {name!r}")
        g = param.grad + state.l2 * param.data
        m = state.m[name]
        v = state.v[name]
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * g * g
        step = state.lr * (m / bc1) / (np.sqrt(v / bc2) + state.eps)
        param.data = snap_f32(param.data - step)


class PlateauState:
    """Cut the learning rate when a monitored metric stops improving.

    A metric improves when it drops below the best seen by more than
    ``threshold`` (absolute). After more than ``patience`` consecutive
    non-improving epochs the LR is multiplied by ``factor``, floored at
    ``min_lr``, and the counter resets.
    """

    def __init__(self, lr: float = 1e-3, patience: int = 2, factor: float = 0.1,
                 threshold: float = 1e-4, min_lr: float = 1e-6):
        if not 0 < factor < 1:
            raise ConfigError(f"decay factor must lie in (0, 1), got {factor}")
        if patience < 0:
            raise ConfigError(f"patience must be >= 0, got {patience}")
        self.lr = float(lr)
        self.patience = int(patience)
        self.factor = float(factor)
        self.threshold = float(threshold)
        self.min_lr = float(min_lr)
        self.best = math.inf
        self.num_bad = 0
        self.reductions = 0


def plateau_update(state: PlateauState, metric: float) -> float:
    """Record one epoch's validation metric; returns the LR to use next."""
    metric = float(metric)
    if not math.isfinite(metric):
        raise NumericalError(f"validation metric is not finite: {metric}; training diverged")
    if state.best - metric > state.threshold:
        state.best = metric
        state.num_bad = 0
    else:
        state.num_bad += 1
        if state.num_bad > state.patience:
            reduced = max(state.lr * state.factor, state.min_lr)
            if reduced < state.lr:
                state.reductions += 1
            state.lr = reduced
            state.num_bad = 0
    return state.lr
