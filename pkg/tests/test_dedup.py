# pylint: disable=R0201, R0904, W0621
# R0201: Method could be a function
# R0904: Too many public methods
# W0621: Redefined outer name

"""
Tests for duplicate detection and removal.
"""
import math

import pytest

from driftbench import (
    SpecificationError,
    annotate,
    dedup,
    dedup_active,
    dedup_offline,
    dedup_stats,
    find_duplicates,
    split_by_counts,
)

from .utils import (
    brute_force_intra,
    make_dataset,
    pool_dataset,
    retained_vectors,
    split_of,
    vectors,
)

A, B, C, D = [0], [1], [2], [3]


def _section(months, rows):
    return make_dataset([(months[m], y, -1, v) for m, y, v in rows], dimension=4)


def _offline_oracle(split):
    # First occurrence over train, validation and test in order.
    seen = []
    kept = {}
    for name, ds in split.items():
        kept[name] = []
        for i in range(len(ds)):
            if not any(ds.features(i) == v for v in seen):
                seen.append(ds.features(i))
                kept[name].append(i)
    return kept


def _active_oracle(split):
    kept = {"train": [i for i, j in enumerate(brute_force_intra(split.train)) if j < 0]}
    for name in ("validation", "test"):
        section = split.get(name)
        kept[name] = []
        for m in range(len(section.months)):
            start, stop = section.month_bounds(m)
            intra = brute_force_intra(section, start, stop)
            kept[name] += [start + i for i, j in enumerate(intra) if j < 0]
    return kept


@pytest.fixture(scope="session", autouse=True)
def hand_split():
    train = _section(["2019-01"], [(0, 0, A), (0, 0, A), (0, 1, B)])
    val = _section(["2019-02"], [(0, 0, A), (0, 1, C), (0, 1, C)])
    test = _section(["2019-03"], [(0, 1, B), (0, 1, C), (0, 0, D)])
    return split_of(train, val, test)


class TestDedup:
    """
    Tests for find_duplicates, dedup_offline, dedup_active and dedup_stats.
    """

    def test_find_duplicates_aba(self):
        ann = find_duplicates(vectors(4, A, B, A))
        assert ann.intra.tolist() == [-1, -1, 0]
        assert ann.cross_split.tolist() == [-1, -1, -1]

    def test_find_duplicates_all_distinct(self):
        ann = find_duplicates(vectors(4, A, B, C, D))
        assert ann.intra.tolist() == [-1, -1, -1, -1]

    def test_find_duplicates_points_at_first_occurrence(self):
        ann = find_duplicates(vectors(4, A, A, A))
        assert ann.intra.tolist() == [-1, 0, 0]

    def test_find_duplicates_matches_quadratic_oracle(self):
        ds = pool_dataset(500, 50, 16, seed=3)
        assert find_duplicates(ds).intra.tolist() == brute_force_intra(ds)

    def test_find_duplicates_with_mixed_dimensions(self):
        with pytest.raises(SpecificationError) as err:
            find_duplicates(vectors(4, A) + vectors(5, A))
            pytest.fail("find_duplicates() should fail.")
        assert "all samples should share one dimension." in str(err.value)

    def test_dedup_offline_hand_example(self, hand_split):
        res = dedup_offline(hand_split)
        assert retained_vectors(res.train) == [(0,), (1,)]
        assert retained_vectors(res.validation) == [(2,)]
        assert retained_vectors(res.test) == [(3,)]
        assert res.provenance["train"].tolist() == [0, 2]
        assert res.provenance["validation"].tolist() == [1]
        assert res.provenance["test"].tolist() == [2]
        assert res.mode == "offline"

    def test_dedup_offline_cross_links(self, hand_split):
        ann = annotate(hand_split, "offline").annotations
        assert ann["validation"].cross(0) == (0, 0)
        assert ann["test"].cross(0) == (0, 2)
        assert ann["test"].cross(1) == (1, 1)
        assert ann["test"].cross(2) is None

    def test_dedup_offline_keeps_earliest_month(self):
        months = ["2019-02", "2019-03", "2019-04"]
        val = _section(months, [(0, 1, A), (1, 0, B), (2, 1, A)])
        res = dedup_offline(split_of(_section(["2019-01"], [(0, 0, D)]), val, _section(["2019-05"], [(0, 0, C)])))
        assert retained_vectors(res.validation) == [(0,), (1,)]
        assert res.validation.month_index.tolist() == [0, 1]

    def test_dedup_offline_all_pairwise_distinct(self):
        ds = pool_dataset(300, 40, 16, seed=5, months=6)
        res = dedup_offline(split_by_counts(ds, 2, 2, 2))
        keys = res.concat().keys()
        assert len(keys) == len(set(keys))

    def test_dedup_without_duplicates_is_identity(self):
        split = split_of(
            _section(["2019-01"], [(0, 0, A)]),
            _section(["2019-02"], [(0, 1, B)]),
            _section(["2019-03"], [(0, 0, C), (0, 1, D)]),
        )
        for mode in ("offline", "active"):
            res = dedup(split, mode)
            assert res.train == split.train
            assert res.validation == split.validation
            assert res.test == split.test

    def test_dedup_active_hand_example(self):
        test = _section(["2019-03", "2019-04"], [(0, 1, A), (0, 1, A), (0, 0, B), (1, 1, A), (1, 0, C)])
        split = split_of(_section(["2019-01"], [(0, 1, A), (0, 0, D)]), _section(["2019-02"], []), test)
        res = dedup_active(split)
        assert retained_vectors(res.test.month_slice(0)) == [(0,), (1,)]
        assert retained_vectors(res.test.month_slice(1)) == [(0,), (2,)]
        # A stays in train and in the test months.
        assert retained_vectors(res.train) == [(0,), (3,)]
        assert res.provenance["test"].tolist() == [0, 2, 3, 4]

    def test_dedup_active_matches_monthly_oracle(self):
        ds = pool_dataset(400, 30, 12, seed=11, months=8)
        split = split_by_counts(ds, 2, 3, 3)
        ann = annotate(split, "active").annotations
        assert ann["train"].intra.tolist() == brute_force_intra(split.train)
        for name in ("validation", "test"):
            section = split.get(name)
            expected = []
            for m in range(len(section.months)):
                start, stop = section.month_bounds(m)
                expected += brute_force_intra(section, start, stop)
            assert ann[name].intra.tolist() == expected
            assert ann[name].cross_split.tolist() == [-1] * len(section)

    @pytest.mark.parametrize("mode", ["offline", "active"])
    def test_dedup_is_idempotent(self, mode):
        ds = pool_dataset(300, 25, 12, seed=13, months=6)
        once = dedup(split_by_counts(ds, 2, 2, 2), mode)
        twice = dedup(once, mode)
        for name, section in once.items():
            assert twice.get(name) == section

    @pytest.mark.parametrize("mode", ["offline", "active"])
    def test_dedup_matches_quadratic_oracle_on_random_splits(self, mode):
        for k in range(200):
            rate = (k % 10) / 10
            ds = pool_dataset(60, max(1, round(60 * (1 - rate))), 12, seed=100 + k, months=6)
            split = split_by_counts(ds, 2, 2, 2)
            res = dedup(split, mode)
            expected = _offline_oracle(split) if mode == "offline" else _active_oracle(split)
            for name, section in res.items():
                assert res.provenance[name].tolist() == expected[name]
                assert retained_vectors(section) == [retained_vectors(split.get(name))[i] for i in expected[name]]
            twice = dedup(res, mode)
            for name, section in res.items():
                assert twice.get(name) == section

    def test_dedup_with_unknown_mode(self, hand_split):
        with pytest.raises(SpecificationError) as err:
            dedup(hand_split, "online")
            pytest.fail("dedup() should fail.")
        assert "Unknown dedup mode: online." in str(err.value)

    def test_dedup_stats_fully_unique(self):
        split = split_of(
            _section(["2019-01"], [(0, 0, A), (0, 1, B)]),
            _section(["2019-02"], []),
            _section(["2019-03"], [(0, 0, C), (0, 1, D)]),
        )
        report = dedup_stats(split, "offline")
        assert report.fraction_unique("train", "2019-01", 0) == 1.0
        assert report.fraction_unique("test", "2019-03", "malware") == 1.0

    def test_dedup_stats_duplicated_malware(self):
        rows = [("2019-01", 1, -1, [0])] * 348
        rows += [("2019-01", 1, -1, [1, 2 + i]) for i in range(37)]
        rows += [("2019-01", 0, -1, [40 + i]) for i in range(100)]
        ds = make_dataset(rows, dimension=200)
        split = split_of(ds.subset([]), ds.subset([]), ds)
        report = dedup_stats(split, "active")
        counts = report.counts
        row = counts[(counts["split"] == "test") & (counts["month"] == "2019-01") & (counts["class"] == "malware")]
        assert int(row["total"].iloc[0]) == 385
        assert int(row["retained"].iloc[0]) == 38
        assert math.isclose(report.fraction_unique("test", "2019-01", 1), 38 / 385)
        assert round(report.fraction_unique("test", "2019-01", 1), 4) == 0.0987

    def test_dedup_stats_write_csv(self, hand_split, tmp_path):
        paths = dedup_stats(hand_split, "offline").write_csv(tmp_path)
        assert [p.rsplit("/", 1)[-1] for p in paths] == ["dedup_counts.csv", "dedup_ratios.csv"]
        header = (tmp_path / "dedup_counts.csv").read_text().splitlines()[0]
        assert header == "split,month,class,total,retained,fraction_unique"
