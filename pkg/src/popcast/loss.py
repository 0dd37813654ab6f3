"""Composite training loss for daily popularity curves.

The total combines a smooth-L1 value term, smooth-L1 terms on first and
second discrete derivatives of the curve, a peak-position disagreement
penalty, and a tiny total-variation regularizer on the predictions. The
derivative and peak weights start at 1 and follow a cosine schedule down
to a configurable floor over the training horizon.
"""

import math
import warnings
from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .errors import ConfigError, ShapeError

EPSILON = 1e-6
BETA = 0.1


def anneal(epoch: int, horizon: int, floor: float = 0.0):
    """Cosine-annealed weights (lambda1, lambda2, alpha) for one epoch.

    Each weight is floor + (1 - floor) * 0.5 * (1 + cos(pi * e / E)).
    Epochs past the horizon clamp to the floor with a warning.
    """
    if horizon < 1:
        raise ConfigError(f"annealing horizon must be >= 1, got {horizon}")
    if epoch < 0:
        raise ConfigError(f"epoch must be >= 0, got {epoch}")
    if not 0.0 <= floor <= 1.0:
        raise ConfigError(f"annealing floor must lie in [0, 1], got {floor}")
    if epoch > horizon:
        warnings.warn(f"epoch {epoch} past annealing horizon {horizon}; weights clamped")
        w = floor
    else:
        w = floor + (1.0 - floor) * 0.5 * (1.0 + math.cos(math.pi * epoch / horizon))
    return w, w, w


@dataclass(frozen=True)
class LossWeights:
    lambda1: float
    lambda2: float
    alpha: float
    epsilon: float = EPSILON
    beta: float = BETA

    def __post_init__(self):
        for name in ("lambda1", "lambda2", "alpha"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ConfigError(f"{name} must lie in [0, 1], got {v}")
        if self.beta <= 0:
            raise ConfigError(f"beta must be positive, got {self.beta}")
        if self.epsilon < 0:
            raise ConfigError(f"epsilon must be >= 0, got {self.epsilon}")

    @classmethod
    def at_epoch(cls, epoch: int, horizon: int, floor: float = 0.0,
                 epsilon: float = EPSILON, beta: float = BETA) -> "LossWeights":
        l1, l2, a = anneal(epoch, horizon, floor)
        return cls(lambda1=l1, lambda2=l2, alpha=a, epsilon=epsilon, beta=beta)


@dataclass(frozen=True)
class LossReport:
    """Loss value decomposition for one batch.

    ``total`` stays attached to the autodiff graph; the float fields are
    the unweighted component values for logging.
    """

    total: Tensor
    base: float
    d1: float
    d2: float
    peak: float
    laplacian: float
    weights: LossWeights

    @property
    def total_value(self) -> float:
        return float(self.total.data)

    def to_json_dict(self) -> dict:
        return {
            "total": self.total_value,
            "base": self.base,
            "d1": self.d1,
            "d2": self.d2,
            "peak": self.peak,
            "laplacian": self.laplacian,
            "lambda1": self.weights.lambda1,
            "lambda2": self.weights.lambda2,
            "alpha": self.weights.alpha,
        }


def _as_tensor(x) -> Tensor:
    if isinstance(x, Tensor):
        return x
    return Tensor(np.asarray(x, dtype=np.float64))


def smooth_l1(pred, target, beta: float = BETA) -> Tensor:
    return ad.smooth_l1(_as_tensor(pred), _as_tensor(target), beta=beta)


def discrete_diff(series, order: int = 1) -> Tensor:
    """Forward differences along the day axis of a (batch, S) tensor."""
    t = _as_tensor(series)
    if order not in (1, 2):
        raise ConfigError(f"order must be 1 or 2, got {order}")
    steps = t.shape[1]
    if steps <= order:
        raise ShapeError(f"series of length {steps} has no order-{order} differences")
    out = t
    for _ in range(order):
        n = out.shape[1]
        out = ad.sub(ad.narrow(out, 1, n, axis=1), ad.narrow(out, 0, n - 1, axis=1))
    return out


def peak_l1(pred, target) -> float:
    """Mean L1 distance between one-hot peak-day encodings.

    Piecewise constant in the predictions (argmax with first-index tie
    break), so it carries no gradient; each sample contributes 0 or 2.
    """
    p = pred.data if isinstance(pred, Tensor) else np.asarray(pred, dtype=np.float64)
    t = target.data if isinstance(target, Tensor) else np.asarray(target, dtype=np.float64)
    if p.shape != t.shape:
        raise ShapeError(f"peak_l1: shapes {p.shape} and {t.shape} differ")
    mismatch = p.argmax(axis=1) != t.argmax(axis=1)
    return float(2.0 * mismatch.mean())


def laplacian_remainder(pred) -> Tensor:
    """Total variation of the curve and of its slope, averaged over the batch."""
    t = _as_tensor(pred)
    if t.shape[1] < 3:
        raise ShapeError(f"need at least 3 days for curvature, got {t.shape[1]}")
    batch = t.shape[0]
    d1 = discrete_diff(t, 1)
    d2 = discrete_diff(t, 2)
    return ad.scale(ad.add(ad.abs_sum(d1), ad.abs_sum(d2)), 1.0 / batch)


def cgl(pred, target, weights: LossWeights) -> LossReport:
    """Composite gradient loss over a (batch, S) prediction tensor."""
    p = _as_tensor(pred)
    t = _as_tensor(target)
    if p.shape != t.shape:
        raise ShapeError(f"cgl: prediction shape {p.shape} does not match target {t.shape}")
    if p.data.ndim != 2:
        raise ShapeError(f"cgl: expected (batch, days), got {p.shape}")

    base = smooth_l1(p, t, beta=weights.beta)
    d1 = smooth_l1(discrete_diff(p, 1), discrete_diff(t, 1), beta=weights.beta)
    d2 = smooth_l1(discrete_diff(p, 2), discrete_diff(t, 2), beta=weights.beta)
    peak = peak_l1(p, t)
    lr = laplacian_remainder(p)

    total = ad.add(base, ad.scale(d1, weights.lambda1))
    total = ad.add(total, ad.scale(d2, weights.lambda2))
    total = ad.add(total, ad.scale(lr, weights.epsilon))
    # constant leaf: peak position is piecewise constant, no gradient path
    total = ad.add(total, Tensor(np.float64(weights.alpha * peak)))

    return LossReport(
        total=total,
        base=float(base.data),
        d1=float(d1.data),
        d2=float(d2.data),
        peak=peak,
        laplacian=float(lr.data),
        weights=weights,
    )
