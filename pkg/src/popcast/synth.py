"""Seeded synthetic corpus: records plus matching embedding packs.

Desk-scale stand-in for a crawled dataset. View trajectories follow a
saturating growth curve scaled by a heavy-tailed (log-scale normal) final
volume with per-user and per-category multipliers, so day-to-day
popularity stays strongly rank-correlated. Emitted embeddings carry a
noisy copy of each sample's latent appeal, so models can learn from them
without the task becoming trivial.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError
from .packs import FeaturePack
from .records import TEXT_FIELDS, PostRecord

CATEGORIES = (
    "music", "gaming", "sports", "news", "education",
    "comedy", "entertainment", "howto", "science_tech", "travel",
    "film", "autos", "pets", "people_blogs", "nonprofit",
)

LANGUAGES = ("en", "es", "pt", "hi", "ru", "ja", "de", "fr", "ar", "und")
_LANG_WEIGHTS = (0.32, 0.14, 0.10, 0.10, 0.08, 0.07, 0.06, 0.05, 0.04, 0.04)

_WORDS = (
    "night", "river", "stone", "echo", "pixel", "vivid", "lunar", "atlas",
    "ember", "drift", "nova", "petal", "quartz", "raven", "solar", "tidal",
)


@dataclass(frozen=True)
class SynthConfig:
    visual_dim: int = 32
    text_dim: int = 16
    users_per_sample: float = 0.55  # distinct users as a fraction of n
    base_popularity: float = 5.0
    user_effect: float = 1.1
    sample_noise: float = 1.5
    growth_rate: float = 0.18
    growth_spread: float = 0.45
    daily_jitter: float = 0.08
    embed_noise: float = 0.8


def _words(rng, low, high):
    k = int(rng.integers(low, high + 1))
    return " ".join(rng.choice(_WORDS) for _ in range(k))


def generate_synthetic(n: int, seed: int, config: SynthConfig = SynthConfig()):
    """Return (records, packs): n seeded samples and their 6 feature packs."""
    if n < 1:
        raise ConfigError(f"sample count must be >= 1, got {n}")
    rng = np.random.default_rng(seed)

    n_users = max(1, round(n * config.users_per_sample))
    user_quality = rng.normal(0.0, 1.2, size=n_users)
    cat_shift = rng.normal(0.0, 0.6, size=len(CATEGORIES))
    lang_shift = rng.normal(0.0, 0.4, size=len(LANGUAGES))
    cat_probs = rng.dirichlet(np.full(len(CATEGORIES), 2.0))

    user_idx = rng.integers(0, n_users, size=n)
    cat_idx = rng.choice(len(CATEGORIES), size=n, p=cat_probs)
    lang_idx = rng.choice(len(LANGUAGES), size=n, p=np.asarray(_LANG_WEIGHTS))

    appeal = (
        config.base_popularity
        + config.user_effect * user_quality[user_idx]
        + cat_shift[cat_idx]
        + lang_shift[lang_idx]
        + rng.normal(0.0, config.sample_noise, size=n)
    )
    final_pop = np.clip(appeal, 0.05, None)
    final_views = 30.0 * (np.exp2(final_pop) - 1.0)

    days = np.arange(1, 31)
    rates = config.growth_rate * np.exp(rng.normal(0.0, config.growth_spread, size=n))
    curve = 1.0 - np.exp(-np.outer(rates, days))  # (n, 30), increasing per row
    increments = np.diff(np.concatenate([np.zeros((n, 1)), curve], axis=1), axis=1)
    increments *= np.exp(rng.normal(0.0, config.daily_jitter, size=(n, 30)))
    cum = np.cumsum(increments, axis=1)
    views = np.rint(final_views[:, None] * cum / cum[:, -1:]).astype(np.int64)

    followers = np.rint(np.exp2(8.0 + 1.5 * user_quality + rng.normal(0, 0.8, n_users))).astype(np.int64)
    post_count = np.rint(np.exp2(rng.normal(5.0, 1.5, size=n_users))).astype(np.int64)
    per_user_words = [_words(rng, 1, 2) for _ in range(n_users)]

    records = []
    for i in range(n):
        u = int(user_idx[i])
        records.append(
            PostRecord(
                id=f"s{i:06d}",
                category=CATEGORIES[cat_idx[i]],
                title=_words(rng, 2, 8),
                description=_words(rng, 0, 40),
                tags=tuple(_words(rng, 1, 1) for _ in range(int(rng.integers(0, 12)))),
                user_id=f"u{u:05d}_{per_user_words[u].replace(' ', '')}",
                language=LANGUAGES[lang_idx[i]],
                duration_s=float(np.rint(np.exp2(rng.normal(10.0, 1.2)))),
                followers=int(followers[u]),
                post_count=int(post_count[u]),
                views=tuple(int(v) for v in views[i]),
            )
        )

    packs = _make_packs(rng, records, final_pop, user_idx, cat_idx, n_users, config)
    return records, packs


def _make_packs(rng, records, final_pop, user_idx, cat_idx, n_users, config):
    n = len(records)
    ids = tuple(r.id for r in records)
    z = (final_pop - final_pop.mean()) / (final_pop.std() or 1.0)

    def noisy_signal(dim, weight=1.0):
        mat = rng.normal(0.0, 1.0, size=(n, dim))
        mat[:, 0] = weight * z + rng.normal(0.0, config.embed_noise, size=n)
        return mat.astype(np.float32)

    packs = {"visual": FeaturePack("visual", config.visual_dim, ids, noisy_signal(config.visual_dim))}

    # Category and user-id fields repeat their text verbatim across samples,
    # so their embeddings are shared base vectors, not per-sample draws.
    cat_base = rng.normal(0.0, 1.0, size=(len(CATEGORIES), config.text_dim))
    user_base = rng.normal(0.0, 1.0, size=(n_users, config.text_dim))
    per_field = {
        "category": cat_base[cat_idx].astype(np.float32),
        "title": noisy_signal(config.text_dim, weight=0.8),
        "tags": noisy_signal(config.text_dim, weight=0.5),
        "description": noisy_signal(config.text_dim, weight=0.5),
        "user_id": user_base[user_idx].astype(np.float32),
    }
    for field in TEXT_FIELDS:
        packs[f"text_{field}"] = FeaturePack(f"text:{field}", config.text_dim, ids, per_field[field])
    return packs
