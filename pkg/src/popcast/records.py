"""Sample schema, ingestion, cleaning, numeric features, and fold splits.

A sample is one social-media post: raw multi-modal content plus a 30-day
cumulative view-count trajectory. Popularity scores are derived on load
(log2(views/day + 1)) and never persisted, so the transform can change
without a data migration.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigError, DataError

SERIES_DAYS = 30

REQUIRED_FIELDS = (
    "id",
    "category",
    "title",
    "description",
    "tags",
    "user_id",
    "duration_s",
    "followers",
    "post_count",
    "views",
)

# Text-field order is a contract shared by packs, fusion, and the exporter.
TEXT_FIELDS = ("category", "title", "tags", "description", "user_id")

# Order is a contract: numeric feature vectors and normalizers follow it.
NUMERIC_FEATURE_NAMES = (
    "log_followers",
    "post_count",
    "duration_s",
    "title_len_chars",
    "tag_count",
    "desc_len_chars",
    "ep",
)


@dataclass(frozen=True)
class PostRecord:
    id: str
    category: str
    title: str
    description: str
    tags: tuple[str, ...]
    user_id: str
    language: str
    duration_s: float
    followers: int
    post_count: int
    views: tuple[int, ...]

    def popularity(self) -> "PopularitySeries":
        return PopularitySeries.from_views(self.id, self.views)

    def to_json_dict(self) -> dict:
        return {
            "id": self.id,
            "category": self.category,
            "title": self.title,
            "description": self.description,
            "tags": list(self.tags),
            "user_id": self.user_id,
            "language": self.language,
            "duration_s": self.duration_s,
            "followers": self.followers,
            "post_count": self.post_count,
            "views": list(self.views),
        }


@dataclass(frozen=True)
class PopularitySeries:
    id: str
    p: tuple[float, ...]

    @classmethod
    def from_views(cls, sample_id: str, views) -> "PopularitySeries":
        return cls(sample_id, tuple(popularity_score(v, d + 1) for d, v in enumerate(views)))


@dataclass(frozen=True)
class NumericFeatures:
    log_followers: float
    post_count: float
    duration_s: float
    title_len_chars: float
    tag_count: float
    desc_len_chars: float
    ep: float | None = None

    def as_vector(self) -> np.ndarray:
        base = [
            self.log_followers,
            self.post_count,
            self.duration_s,
            self.title_len_chars,
            self.tag_count,
            self.desc_len_chars,
        ]
        if self.ep is not None:
            base.append(self.ep)
        return np.asarray(base, dtype=np.float64)


def popularity_score(views, day) -> float:
    """log2(views/day + 1): the daily popularity transform."""
    if day < 1 or day != int(day):
        raise ValueError(f"day must be an integer >= 1, got {day}")
    if views < 0:
        raise ValueError(f"views must be >= 0, got {views}")
    return math.log2(views / day + 1.0)


@dataclass
class RejectionReport:
    counts: dict[str, int] = field(default_factory=dict)
    rejected: list[dict] = field(default_factory=list)

    def add(self, line_no: int, sample_id, reason: str):
        self.counts[reason] = self.counts.get(reason, 0) + 1
        self.rejected.append({"line": line_no, "id": sample_id, "reason": reason})

    @property
    def total(self) -> int:
        return len(self.rejected)

    def to_json_dict(self) -> dict:
        return {"total_rejected": self.total, "counts": self.counts, "rejected": self.rejected}


def _parse_line(raw: dict, for_prediction: bool = False) -> PostRecord:
    """Validate one parsed object; raises ValueError with a reason token.

    Prediction inputs have no known future, so ``for_prediction`` relaxes
    the views requirement to any (possibly empty) leading part of a series.
    """
    for name in REQUIRED_FIELDS:
        if name == "views" and for_prediction:
            continue
        if name not in raw:
            raise ValueError(f"missing_{name}")
    views = raw.get("views", []) if for_prediction else raw["views"]
    if not isinstance(views, list) or not all(isinstance(v, (int, float)) for v in views):
        raise ValueError("bad_type_views")
    if len(views) < SERIES_DAYS and not for_prediction:
        raise ValueError("short_series")
    if len(views) > SERIES_DAYS:
        raise ValueError("long_series")
    if any(v < 0 for v in views):
        raise ValueError("negative_views")
    if any(b < a for a, b in zip(views, views[1:])):
        raise ValueError("decreasing_views")
    tags = raw["tags"]
    if not isinstance(tags, list) or not all(isinstance(t, str) for t in tags):
        raise ValueError("bad_type_tags")
    try:
        duration_s = float(raw["duration_s"])
        followers = int(raw["followers"])
        post_count = int(raw["post_count"])
    except (TypeError, ValueError):
        raise ValueError("bad_type_numeric")
    if duration_s < 0 or followers < 0 or post_count < 0:
        raise ValueError("negative_field")
    return PostRecord(
        id=str(raw["id"]),
        category=str(raw["category"]),
        title=str(raw["title"]),
        description=str(raw["description"]),
        tags=tuple(tags),
        user_id=str(raw["user_id"]),
        language=str(raw.get("language") or "und"),
        duration_s=duration_s,
        followers=followers,
        post_count=post_count,
        views=tuple(int(v) for v in views),
    )


def ingest(path, for_prediction: bool = False) -> tuple[list[PostRecord], RejectionReport]:
    """Parse a JSONL record file; invalid lines are reported, not fatal."""
    path = Path(path)
    if not path.exists():
        raise DataError(f"dataset file not found: {path}")
    records: list[PostRecord] = []
    report = RejectionReport()
    with path.open("r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                raw = json.loads(line)
            except json.JSONDecodeError:
                report.add(line_no, None, "malformed_json")
                continue
            try:
                records.append(_parse_line(raw, for_prediction=for_prediction))
            except ValueError as exc:
                report.add(line_no, raw.get("id"), str(exc))
    return records, report


def write_records(records, path) -> None:
    path = Path(path)
    with path.open("w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(json.dumps(rec.to_json_dict(), ensure_ascii=False) + "\n")


def clean_outliers(records) -> tuple[list[PostRecord], list[str]]:
    """Drop samples whose final-day popularity is beyond 3 sigma of the batch.

    Mean and deviation are computed over the input in a single pass; with
    fewer than two records the filter is a no-op (sigma undefined).
    """
    records = list(records)
    if len(records) < 2:
        warnings.warn("3-sigma filter skipped: need at least 2 records")
        return records, []
    final = np.array([r.popularity().p[-1] for r in records])
    mu = final.mean()
    sigma = final.std()
    keep_mask = np.abs(final - mu) <= 3.0 * sigma
    retained = [r for r, keep in zip(records, keep_mask) if keep]
    dropped = [r.id for r, keep in zip(records, keep_mask) if not keep]
    return retained, dropped


def derive_numeric(record: PostRecord, ep_mode: bool = True) -> NumericFeatures:
    """Raw (pre-normalization) numeric features for one cleaned record.

    Follower counts are long-tailed, so they enter as log2(x+1), the same
    family as the popularity transform. Lengths count characters
    (codepoints), not words.
    """
    return NumericFeatures(
        log_followers=math.log2(record.followers + 1),
        post_count=float(record.post_count),
        duration_s=float(record.duration_s),
        title_len_chars=float(len(record.title)),
        tag_count=float(len(record.tags)),
        desc_len_chars=float(len(record.description)),
        ep=record.popularity().p[0] if ep_mode else None,
    )


@dataclass(frozen=True)
class Normalizer:
    feature_names: tuple[str, ...]
    mean: np.ndarray
    std: np.ndarray
    degenerate: tuple[str, ...]

    def apply(self, features: NumericFeatures) -> np.ndarray:
        return self.apply_vector(features.as_vector())

    def apply_vector(self, vec: np.ndarray) -> np.ndarray:
        if vec.shape != self.mean.shape:
            raise DataError(f"normalizer fitted on {len(self.mean)} features, got {len(vec)}")
        return (vec - self.mean) / self.std

    def invert(self, z: np.ndarray) -> np.ndarray:
        return z * self.std + self.mean

    def to_json_dict(self) -> dict:
        return {
            "feature_names": list(self.feature_names),
            "mean": self.mean.tolist(),
            "std": self.std.tolist(),
            "degenerate": list(self.degenerate),
        }

    @classmethod
    def from_json_dict(cls, d: dict) -> "Normalizer":
        return cls(
            feature_names=tuple(d["feature_names"]),
            mean=np.asarray(d["mean"], dtype=np.float64),
            std=np.asarray(d["std"], dtype=np.float64),
            degenerate=tuple(d["degenerate"]),
        )


def fit_normalizer(features: list[NumericFeatures]) -> Normalizer:
    """Per-feature z-score parameters; fit on the training fold only."""
    if not features:
        raise ConfigError("cannot fit a normalizer on zero samples")
    ep_on = features[0].ep is not None
    names = NUMERIC_FEATURE_NAMES if ep_on else NUMERIC_FEATURE_NAMES[:-1]
    mat = np.stack([f.as_vector() for f in features])
    mean = mat.mean(axis=0)
    std = mat.std(axis=0)
    degenerate = tuple(n for n, s in zip(names, std) if s == 0.0)
    if degenerate:
        warnings.warn(f"constant features get unit scale: {', '.join(degenerate)}")
        std = np.where(std == 0.0, 1.0, std)
    return Normalizer(feature_names=names, mean=mean, std=std, degenerate=degenerate)


@dataclass(frozen=True)
class FoldSplit:
    k: int
    assignments: dict[str, int]

    def fold_ids(self, fold: int) -> list[str]:
        return [i for i, f in self.assignments.items() if f == fold]

    def complement_ids(self, fold: int) -> list[str]:
        return [i for i, f in self.assignments.items() if f != fold]


def make_folds(ids, k: int = 5, seed: int = 0) -> FoldSplit:
    """Seeded shuffle then round-robin assignment; sizes differ by at most 1."""
    ids = list(ids)
    if k < 2:
        raise ConfigError(f"fold count must be >= 2, got {k}")
    if len(ids) < k:
        raise ConfigError(f"need at least {k} samples for {k} folds, got {len(ids)}")
    if len(set(ids)) != len(ids):
        raise DataError("duplicate sample ids in fold input")
    order = np.random.default_rng(seed).permutation(len(ids))
    return FoldSplit(k=k, assignments={ids[j]: i % k for i, j in enumerate(order)})
