"""Evaluation metrics for daily popularity forecasts.

All metrics operate on (n_samples, n_days) score matrices. Days with a
constant predicted or true column have no defined rank correlation; those
entries become NaN and are reported through ``degenerate_days`` instead of
silently skewing averages.
"""

from dataclasses import dataclass

import numpy as np

from .analysis import rank_average_ties
from .errors import DataError, ShapeError


def _as_matrix(pred, truth):
    p = np.asarray(pred, dtype=np.float64)
    t = np.asarray(truth, dtype=np.float64)
    if p.ndim != 2 or t.ndim != 2:
        raise ShapeError(f"expected 2-d score matrices, got {p.shape} and {t.shape}")
    if p.shape != t.shape:
        raise ShapeError(f"prediction shape {p.shape} does not match truth shape {t.shape}")
    if p.shape[0] < 1:
        raise DataError("need at least one sample")
    return p, t


def mae_daily(pred, truth) -> np.ndarray:
    p, t = _as_matrix(pred, truth)
    return np.abs(p - t).mean(axis=0)


def amae(mae_d) -> float:
    v = np.asarray(mae_d, dtype=np.float64)
    if v.size == 0:
        raise DataError("cannot average an empty metric vector")
    return float(v.mean())


def asrc(src_d) -> float:
    v = np.asarray(src_d, dtype=np.float64)
    if v.size == 0:
        raise DataError("cannot average an empty metric vector")
    return float(np.nanmean(v)) if np.isnan(v).any() else float(v.mean())


def src_daily(pred, truth):
    """Per-day Spearman correlation across samples.

    Returns (src_d, degenerate_days) where degenerate days are 0-based
    column indices whose prediction or truth column was constant.
    """
    p, t = _as_matrix(pred, truth)
    if p.shape[0] < 2:
        raise DataError("rank correlation needs at least two samples")
    n, days = p.shape
    out = np.empty(days)
    degenerate = []
    for d in range(days):
        pc, tc = p[:, d], t[:, d]
        if np.ptp(pc) == 0.0 or np.ptp(tc) == 0.0:
            out[d] = np.nan
            degenerate.append(d)
            continue
        rp = rank_average_ties(pc)
        rt = rank_average_ties(tc)
        zp = (rp - rp.mean()) / rp.std(ddof=1)
        zt = (rt - rt.mean()) / rt.std(ddof=1)
        # mean sample-std z-product == Pearson over the ranks
        out[d] = float(zp @ zt) / (n - 1)
    return out, tuple(degenerate)


@dataclass(frozen=True)
class EvalReport:
    """Aggregate forecast quality over a prediction horizon.

    ``first_day`` is the 1-based calendar day of column 0 (2 when the model
    consumes day-1 popularity as an input, 1 otherwise). Day 30 is singled
    out because long-range accuracy is the quantity of interest.
    """

    first_day: int
    mae_d: tuple[float, ...]
    amae: float
    src_d: tuple[float, ...]
    asrc: float
    mae_day30: float
    src_day30: float
    degenerate_days: tuple[int, ...]
    n_samples: int

    @property
    def days(self) -> tuple[int, ...]:
        return tuple(range(self.first_day, self.first_day + len(self.mae_d)))

    def to_json_dict(self) -> dict:
        return {
            "first_day": self.first_day,
            "n_samples": self.n_samples,
            "amae": self.amae,
            "asrc": self.asrc,
            "mae_day30": self.mae_day30,
            "src_day30": self.src_day30,
            "mae_d": list(self.mae_d),
            "src_d": [None if np.isnan(v) else v for v in self.src_d],
            "degenerate_days": list(self.degenerate_days),
        }

    @classmethod
    def from_json_dict(cls, d: dict) -> "EvalReport":
        return cls(
            first_day=int(d["first_day"]),
            mae_d=tuple(float(v) for v in d["mae_d"]),
            amae=float(d["amae"]),
            src_d=tuple(float("nan") if v is None else float(v) for v in d["src_d"]),
            asrc=float(d["asrc"]),
            mae_day30=float(d["mae_day30"]),
            src_day30=float(d["src_day30"]),
            degenerate_days=tuple(int(v) for v in d.get("degenerate_days", ())),
            n_samples=int(d["n_samples"]),
        )


def evaluate_forecast(pred, truth, first_day: int) -> EvalReport:
    """Full metric bundle for a horizon whose last column is day 30."""
    p, t = _as_matrix(pred, truth)
    mae_d = mae_daily(p, t)
    src_d, degenerate = src_daily(p, t)
    last = first_day + p.shape[1] - 1
    if last != 30:
        raise DataError(f"horizon ends on day {last}, expected 30")
    return EvalReport(
        first_day=first_day,
        mae_d=tuple(float(v) for v in mae_d),
        amae=amae(mae_d),
        src_d=tuple(float(v) for v in src_d),
        asrc=asrc(src_d),
        mae_day30=float(mae_d[-1]),
        src_day30=float(src_d[-1]),
        degenerate_days=degenerate,
        n_samples=p.shape[0],
    )
