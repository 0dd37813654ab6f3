import json
import math

import numpy as np
import pytest

from popcast.errors import ConfigError, DataError
from popcast.records import (
    Normalizer,
    PostRecord,
    clean_outliers,
    derive_numeric,
    fit_normalizer,
    ingest,
    make_folds,
    popularity_score,
    write_records,
)


def make_record(sample_id="s0", views=None, **overrides):
    if views is None:
        views = [10 * (d + 1) for d in range(30)]
    fields = dict(
        id=sample_id,
        category="music",
        title="a title",
        description="words",
        tags=("one", "two"),
        user_id="u1",
        language="en",
        duration_s=60.0,
        followers=100,
        post_count=5,
        views=tuple(views),
    )
    fields.update(overrides)
    return PostRecord(**fields)


def views_for_final_popularity(p30, days=30):
    """Linear ramp whose final-day popularity is exactly p30."""
    total = days * (2.0 ** p30 - 1.0)
    return [int(round(total * (d + 1) / days)) for d in range(days)]


class TestPopularityScore:
    def test_zero_views_is_zero(self):
        for d in (1, 7, 30):
            assert popularity_score(0, d) == 0.0

    def test_views_equal_day_is_one(self):
        for d in (1, 3, 30):
            assert popularity_score(d, d) == pytest.approx(1.0)

    def test_three_views_per_day_is_two(self):
        for d in (1, 5, 30):
            assert popularity_score(3 * d, d) == pytest.approx(2.0)

    def test_domain_errors(self):
        with pytest.raises(ValueError):
            popularity_score(10, 0)
        with pytest.raises(ValueError):
            popularity_score(-1, 5)

    def test_monotone_in_views(self):
        assert popularity_score(100, 7) < popularity_score(200, 7)

    def test_series_nonnegative_full_length(self):
        series = make_record().popularity()
        assert len(series.p) == 30
        assert all(v >= 0 for v in series.p)


class TestIngest:
    def write_lines(self, tmp_path, lines):
        path = tmp_path / "data.jsonl"
        path.write_text("\n".join(lines) + "\n", encoding="utf-8")
        return path

    def test_valid_file(self, tmp_path):
        recs = [make_record(f"s{i}") for i in range(3)]
        path = tmp_path / "ok.jsonl"
        write_records(recs, path)
        got, report = ingest(path)
        assert len(got) == 3
        assert report.total == 0
        assert got[0] == recs[0]

    def test_missing_views_field(self, tmp_path):
        raw = make_record().to_json_dict()
        del raw["views"]
        path = self.write_lines(tmp_path, [json.dumps(raw)])
        got, report = ingest(path)
        assert got == []
        assert report.counts == {"missing_views": 1}

    def test_short_series(self, tmp_path):
        raw = make_record(views=[1] * 30).to_json_dict()
        raw["views"] = raw["views"][:29]
        path = self.write_lines(tmp_path, [json.dumps(raw)])
        _, report = ingest(path)
        assert report.counts == {"short_series": 1}
        assert report.rejected[0]["id"] == "s0"

    def test_mixed_reasons(self, tmp_path):
        ok = json.dumps(make_record("good").to_json_dict())
        bad_json = "{not json"
        decreasing = make_record("dec").to_json_dict()
        decreasing["views"] = [5] * 29 + [4]
        negative = make_record("neg").to_json_dict()
        negative["followers"] = -2
        path = self.write_lines(tmp_path, [ok, bad_json, json.dumps(decreasing), json.dumps(negative)])
        got, report = ingest(path)
        assert [r.id for r in got] == ["good"]
        assert report.counts == {"malformed_json": 1, "decreasing_views": 1, "negative_field": 1}

    def test_missing_language_defaults_to_und(self, tmp_path):
        raw = make_record().to_json_dict()
        del raw["language"]
        path = self.write_lines(tmp_path, [json.dumps(raw)])
        got, report = ingest(path)
        assert report.total == 0
        assert got[0].language == "und"

    def test_unreadable_file(self, tmp_path):
        with pytest.raises(DataError):
            ingest(tmp_path / "nope.jsonl")


class TestCleanOutliers:
    def test_identical_series_nothing_dropped(self):
        recs = [make_record(f"s{i}", views=[7 * (d + 1) for d in range(30)]) for i in range(10)]
        kept, dropped = clean_outliers(recs)
        assert len(kept) == 10 and dropped == []

    def test_single_planted_outlier_dropped(self):
        rng = np.random.default_rng(5)
        p30s = rng.normal(5.0, 0.1, size=1000)
        recs = [
            make_record(f"s{i:04d}", views=views_for_final_popularity(p))
            for i, p in enumerate(p30s)
        ]
        recs.append(make_record("outlier", views=views_for_final_popularity(5.0 + 10 * 0.1)))
        # independent recomputation of the 3-sigma rule over actual scores
        finals = [r.popularity().p[-1] for r in recs]
        mu = sum(finals) / len(finals)
        sigma = math.sqrt(sum((f - mu) ** 2 for f in finals) / len(finals))
        expected = [r.id for r, f in zip(recs, finals) if abs(f - mu) > 3 * sigma]
        assert "outlier" in expected

        kept, dropped = clean_outliers(recs)
        assert dropped == expected
        assert len(kept) == len(recs) - len(expected)

    def test_single_record_passthrough(self):
        rec = make_record()
        with pytest.warns(UserWarning):
            kept, dropped = clean_outliers([rec])
        assert kept == [rec] and dropped == []

    def test_fixpoint_within_three_passes(self):
        from popcast.synth import generate_synthetic

        records, _ = generate_synthetic(800, seed=11)
        current = records
        for _ in range(3):
            nxt, dropped = clean_outliers(current)
            assert len(nxt) <= len(current)
            current = nxt
        again, dropped = clean_outliers(current)
        assert dropped == []


class TestDeriveNumeric:
    def test_log_followers(self):
        assert derive_numeric(make_record(followers=0)).log_followers == 0.0
        assert derive_numeric(make_record(followers=3)).log_followers == pytest.approx(2.0)

    def test_lengths_count_characters(self):
        rec = make_record(title="abc", tags=("x", "y"), description="abcd")
        feats = derive_numeric(rec)
        assert feats.title_len_chars == 3
        assert feats.tag_count == 2
        assert feats.desc_len_chars == 4

    def test_ep_is_day_one_popularity(self):
        rec = make_record(views=[5] + [10 * (d + 1) for d in range(1, 30)])
        feats = derive_numeric(rec, ep_mode=True)
        assert feats.ep == pytest.approx(math.log2(6))
        assert derive_numeric(rec, ep_mode=False).ep is None

    def test_vector_length_tracks_ep_mode(self):
        rec = make_record()
        assert derive_numeric(rec, ep_mode=True).as_vector().shape == (7,)
        assert derive_numeric(rec, ep_mode=False).as_vector().shape == (6,)


class TestNormalizer:
    def feats(self, values):
        return [
            derive_numeric(make_record(f"s{i}", followers=0, post_count=0, duration_s=v))
            for i, v in enumerate(values)
        ]

    def test_known_zscores(self):
        with pytest.warns(UserWarning):
            norm = fit_normalizer(self.feats([1.0, 2.0, 3.0]))
        col = list(norm.feature_names).index("duration_s")
        zs = [norm.apply(f)[col] for f in self.feats([1.0, 2.0, 3.0])]
        assert zs == pytest.approx([-1.224744871391589, 0.0, 1.224744871391589], abs=1e-4)

    def test_constant_feature_falls_back_to_unit_scale(self):
        with pytest.warns(UserWarning, match="constant features"):
            norm = fit_normalizer(self.feats([5.0, 5.0, 5.0]))
        col = list(norm.feature_names).index("duration_s")
        assert all(norm.apply(f)[col] == 0.0 for f in self.feats([5.0, 5.0, 5.0]))
        assert "duration_s" in norm.degenerate

    def test_heldout_value_at_mean_maps_to_zero(self):
        with pytest.warns(UserWarning):
            norm = fit_normalizer(self.feats([1.0, 2.0, 3.0, 6.0]))
        col = list(norm.feature_names).index("duration_s")
        assert norm.apply(self.feats([3.0])[0])[col] == 0.0

    def test_self_fit_is_standardized(self):
        rng = np.random.default_rng(2)
        feats = [
            derive_numeric(
                make_record(
                    f"s{i}",
                    followers=int(rng.integers(0, 10000)),
                    post_count=int(rng.integers(1, 300)),
                    duration_s=float(rng.uniform(10, 4000)),
                    title=" " * int(rng.integers(1, 60)),
                    description=" " * int(rng.integers(1, 300)),
                    tags=tuple("t" for _ in range(int(rng.integers(0, 9)))),
                    views=[int(v) for v in np.cumsum(rng.integers(1, 50, size=30))],
                )
            )
            for i in range(64)
        ]
        norm = fit_normalizer(feats)
        z = np.stack([norm.apply(f) for f in feats])
        assert np.abs(z.mean(axis=0)).max() < 1e-9
        assert np.abs(z.std(axis=0) - 1.0).max() < 1e-9

    def test_round_trip_inversion(self):
        feats = self.feats([1.0, 4.0, 9.0, 16.0])
        with pytest.warns(UserWarning):
            norm = fit_normalizer(feats)
        for f in feats:
            vec = f.as_vector()
            assert np.abs(norm.invert(norm.apply(f)) - vec).max() < 1e-9

    def test_json_round_trip(self):
        with pytest.warns(UserWarning):
            norm = fit_normalizer(self.feats([1.0, 2.0]))
        back = Normalizer.from_json_dict(json.loads(json.dumps(norm.to_json_dict())))
        assert back.feature_names == norm.feature_names
        assert back.degenerate == norm.degenerate
        assert np.array_equal(back.mean, norm.mean)
        assert np.array_equal(back.std, norm.std)


class TestMakeFolds:
    def test_even_split(self):
        split = make_folds([f"s{i}" for i in range(10)], k=5, seed=3)
        sizes = sorted(len(split.fold_ids(f)) for f in range(5))
        assert sizes == [2, 2, 2, 2, 2]

    def test_uneven_split_sizes(self):
        split = make_folds([f"s{i}" for i in range(11)], k=5, seed=3)
        sizes = sorted((len(split.fold_ids(f)) for f in range(5)), reverse=True)
        assert sizes == [3, 2, 2, 2, 2]

    def test_deterministic(self):
        ids = [f"s{i}" for i in range(23)]
        assert make_folds(ids, 5, seed=9).assignments == make_folds(ids, 5, seed=9).assignments

    def test_partition(self):
        ids = [f"s{i}" for i in range(37)]
        split = make_folds(ids, k=5, seed=1)
        seen = [i for f in range(5) for i in split.fold_ids(f)]
        assert sorted(seen) == sorted(ids)

    def test_too_few_samples(self):
        with pytest.raises(ConfigError):
            make_folds(["a", "b"], k=5, seed=0)
        with pytest.raises(ConfigError):
            make_folds(["a", "b", "c"], k=1, seed=0)
