"""Descriptive statistics over daily popularity scores.

Covers the dataset-exploration side of the pipeline: per-day distribution
summaries (box-plot style), 30x30 inter-day correlation matrices, and
per-category / per-language group tables.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DataError, UndefinedCorrelationError
from .records import SERIES_DAYS


def rank_average_ties(x) -> np.ndarray:
    """Ranks 1..n with tied values sharing the average of their ranks."""
    x = np.asarray(x, dtype=np.float64)
    order = np.argsort(x, kind="stable")
    ranks = np.empty(len(x))
    i, n = 0, len(x)
    sorted_x = x[order]
    while i < n:
        j = i
        while j + 1 < n and sorted_x[j + 1] == sorted_x[i]:
            j += 1
        ranks[order[i : j + 1]] = 0.5 * (i + j) + 1.0
        i = j + 1
    return ranks


def _validated(x, y):
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1:
        raise DataError(f"correlation needs equal-length vectors, got {x.shape} and {y.shape}")
    if len(x) < 2:
        raise DataError("correlation needs at least 2 points")
    if np.ptp(x) == 0.0 or np.ptp(y) == 0.0:
        raise UndefinedCorrelationError("correlation undefined for constant input")
    return x, y


def pearson(x, y) -> float:
    """Linear correlation: centered product over the product of spreads."""
    x, y = _validated(x, y)
    dx = x - x.mean()
    dy = y - y.mean()
    return float((dx * dy).sum() / np.sqrt((dx * dx).sum() * (dy * dy).sum()))


def spearman(x, y, rank_transform: bool = True) -> float:
    """Rank-order correlation with average-tie ranks.

    With rank_transform off, computes the normalized z-score product over
    the raw values instead (sample standard deviation, 1/(n-1) sum), which
    coincides with the linear coefficient; the rank form is the default.
    """
    x, y = _validated(x, y)
    if rank_transform:
        return pearson(rank_average_ties(x), rank_average_ties(y))
    n = len(x)
    zx = (x - x.mean()) / x.std(ddof=1)
    zy = (y - y.mean()) / y.std(ddof=1)
    return float((zx * zy).sum() / (n - 1))


@dataclass(frozen=True)
class CorrelationMatrices:
    pc: np.ndarray  # (30, 30) linear correlation between day columns
    src: np.ndarray  # (30, 30) rank correlation between day columns
    degenerate_days: tuple[int, ...]  # 1-based days with a constant column


def _corr_matrix(cols: np.ndarray) -> np.ndarray:
    centered = cols - cols.mean(axis=0)
    cov = centered.T @ centered
    spread = np.sqrt(np.diag(cov))
    with np.errstate(invalid="ignore", divide="ignore"):
        mat = cov / np.outer(spread, spread)
    mat = np.clip((mat + mat.T) / 2.0, -1.0, 1.0)
    return mat


def correlation_matrices(series_list) -> CorrelationMatrices:
    """Day-by-day correlation of popularity across samples.

    Entry (i, j) correlates day i+1 against day j+1 scores over all
    samples. Constant day columns yield NaN rows/columns and are flagged.
    """
    series_list = list(series_list)
    if len(series_list) < 2:
        raise DataError("need at least 2 samples for day correlations")
    cols = np.array([s.p for s in series_list])  # (n, 30)
    degenerate = [d for d in range(cols.shape[1]) if np.ptp(cols[:, d]) == 0.0]
    pc = _corr_matrix(cols)
    ranked = np.column_stack([rank_average_ties(cols[:, d]) for d in range(cols.shape[1])])
    src = _corr_matrix(ranked)
    for d in degenerate:
        pc[d, :] = pc[:, d] = np.nan
        src[d, :] = src[:, d] = np.nan
    return CorrelationMatrices(pc=pc, src=src, degenerate_days=tuple(d + 1 for d in degenerate))


@dataclass(frozen=True)
class DistributionSummary:
    """Per-day five-number summary plus mean/std of popularity scores."""

    days: tuple[int, ...]
    minimum: np.ndarray
    q1: np.ndarray
    median: np.ndarray
    q3: np.ndarray
    maximum: np.ndarray
    mean: np.ndarray
    std: np.ndarray

    def rows(self):
        for i, day in enumerate(self.days):
            yield (
                day,
                self.minimum[i],
                self.q1[i],
                self.median[i],
                self.q3[i],
                self.maximum[i],
                self.mean[i],
                self.std[i],
            )


def distribution_summary(series_list) -> DistributionSummary:
    cols = np.array([s.p for s in series_list])
    return DistributionSummary(
        days=tuple(range(1, cols.shape[1] + 1)),
        minimum=cols.min(axis=0),
        q1=np.percentile(cols, 25, axis=0),
        median=np.percentile(cols, 50, axis=0),
        q3=np.percentile(cols, 75, axis=0),
        maximum=cols.max(axis=0),
        mean=cols.mean(axis=0),
        std=cols.std(axis=0),
    )


@dataclass(frozen=True)
class GroupStat:
    group: str
    count: int
    mean_popularity: float  # mean final-day score


def group_stats(records, key: str) -> list[GroupStat]:
    """Per-group sample count and mean final-day popularity, largest first."""
    if key not in ("category", "language"):
        raise DataError(f"group key must be 'category' or 'language', got {key!r}")
    buckets: dict[str, list[float]] = {}
    for rec in records:
        buckets.setdefault(getattr(rec, key), []).append(rec.popularity().p[SERIES_DAYS - 1])
    stats = [GroupStat(g, len(v), float(np.mean(v))) for g, v in buckets.items()]
    stats.sort(key=lambda s: (-s.count, s.group))
    return stats
