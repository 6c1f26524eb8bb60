# pylint: disable=R0201, R0904, W0621
# R0201: Method could be a function
# R0904: Too many public methods
# W0621: Redefined outer name

"""
Tests for hyperparameter search.
"""
import json

import pytest

from driftbench import (
    SearchError,
    SearchSpace,
    SpecificationError,
    hyperparameter_influence,
    run_search_active,
    run_search_offline,
    sample_params,
)
from driftbench.hpo import best_so_far, spec_from_file, trials_frame, write_search
from driftbench.numerics import RngStream
from driftbench.search_space import Categorical, Constant

from .utils import make_dataset, split_of

ETAS = [0.05, 0.1, 0.2, 0.3, 0.4, 0.5]


def _section(month, n_benign=30, n_malware=10, families=True):
    rows = [(month, 0, -1, [0])] * n_benign + [(month, 1, 0 if families else -1, [1])] * n_malware
    return make_dataset(rows, dimension=2)


@pytest.fixture(scope="session", autouse=True)
def split():
    return split_of(_section("2020-01"), _section("2020-02"), _section("2020-03"))


@pytest.fixture(scope="session", autouse=True)
def stump_space():
    # One shrunk stump over a 3:1 prior: only the largest eta lifts the
    # malware leaf above the decision threshold.
    return SearchSpace.table("GBT").override(
        **{
            "max_depth": Constant(1),
            "alpha": Constant(0.0),
            "lambda": Constant(1.0),
            "eta": Categorical(ETAS),
            "balance": Constant(False),
            "num_boost_round": Constant(1),
        }
    )


class TestHPO:
    """
    Tests for run_search_offline, run_search_active and the trial reports.
    """

    def test_sample_params_is_reproducible(self):
        space = SearchSpace.table("MLP")
        a = sample_params(space, RngStream(5).child("trial-0"))
        b = sample_params(space, RngStream(5).child("trial-0"))
        assert a == b
        assert a.kind == "MLP"

    def test_search_budget_one(self, split, stump_space):
        best, trials = run_search_offline(split, "GBT", 1, seed=0, space=stump_space)
        assert len(trials) == 1
        assert best == trials[0].spec
        assert trials[0].ok

    def test_search_finds_planted_optimum(self, split, stump_space):
        hits = 0
        for seed in range(20):
            best, trials = run_search_offline(split, "GBT", 50, seed=seed, space=stump_space)
            assert len(trials) == 50
            if best["eta"] == 0.5:
                hits += 1
        assert hits >= 19

    def test_search_objectives(self, split, stump_space):
        _, trials = run_search_offline(split, "GBT", 12, seed=1, space=stump_space)
        for t in trials:
            assert t.objective == (1.0 if t.spec["eta"] == 0.5 else 0.0)

    def test_best_so_far_is_monotone(self, split, stump_space):
        _, trials = run_search_offline(split, "GBT", 15, seed=2, space=stump_space)
        curve = best_so_far(trials)
        assert len(curve) == 15
        assert all(a <= b for a, b in zip(curve, curve[1:]))

    def test_search_is_reproducible(self, split, stump_space):
        a = run_search_offline(split, "GBT", 8, seed=3, space=stump_space)[1]
        b = run_search_offline(split, "GBT", 8, seed=3, space=stump_space)[1]
        assert [t.spec for t in a] == [t.spec for t in b]
        assert [t.objective for t in a] == [t.objective for t in b]

    def test_search_parallel_matches_serial(self, split, stump_space):
        serial = run_search_offline(split, "GBT", 6, seed=4, space=stump_space, jobs=1)[1]
        parallel = run_search_offline(split, "GBT", 6, seed=4, space=stump_space, jobs=2)[1]
        assert [t.spec for t in serial] == [t.spec for t in parallel]
        assert [t.objective for t in serial] == [t.objective for t in parallel]

    def test_active_search_with_zero_budget_equals_offline(self, split, stump_space):
        offline = run_search_offline(split, "GBT", 6, seed=5, space=stump_space)[1]
        active = run_search_active(split, "GBT", 6, 0, seed=5, space=stump_space)[1]
        assert [t.spec for t in offline] == [t.spec for t in active]
        assert [t.objective for t in offline] == [t.objective for t in active]

    def test_search_all_trials_failed(self):
        split = split_of(
            _section("2020-01", families=False),
            _section("2020-02", families=False),
            _section("2020-03", families=False),
        )
        with pytest.raises(SearchError) as err:
            run_search_offline(split, "HCC", 2, seed=0)
            pytest.fail("run_search_offline() should fail.")
        assert "all 2 trials of HCC failed." in str(err.value)

    @pytest.mark.parametrize(
        "budget, msg",
        [
            (0, "budget should be positive int."),
            (1.5, "budget should be positive int."),
        ],
    )
    def test_search_with_invalid_budget(self, split, budget, msg):
        with pytest.raises(SpecificationError) as err:
            run_search_offline(split, "GBT", budget)
            pytest.fail("run_search_offline() should fail.")
        assert msg in str(err.value)

    def test_search_without_validation(self):
        split = split_of(_section("2020-01"), make_dataset([], dimension=2), _section("2020-03"))
        with pytest.raises(SpecificationError) as err:
            run_search_offline(split, "GBT", 1)
            pytest.fail("run_search_offline() should fail.")
        assert "validation split should hold at least one sample." in str(err.value)

    def test_search_with_mismatching_space(self, split):
        with pytest.raises(SpecificationError) as err:
            run_search_offline(split, "GBT", 1, space=SearchSpace.table("SVM"))
            pytest.fail("run_search_offline() should fail.")
        assert "space is for SVM, not GBT." in str(err.value)

    def test_active_search_with_invalid_al_budget(self, split):
        with pytest.raises(SpecificationError) as err:
            run_search_active(split, "GBT", 1, -1)
            pytest.fail("run_search_active() should fail.")
        assert "al_budget should be non-negative int." in str(err.value)

    def test_trials_frame_marks_failures(self, split, stump_space):
        _, trials = run_search_offline(split, "GBT", 4, seed=6, space=stump_space)
        trials[1].status = "failed"
        df = trials_frame(trials)
        assert list(df.columns) == ["trial", "objective", "best_so_far", "params_json", "fpr", "fnr", "status"]
        assert df["status"].tolist()[1] == "failed"
        assert df["objective"].isna().tolist() == [False, True, False, False]

    def test_hyperparameter_influence(self, split, stump_space):
        _, trials = run_search_offline(split, "GBT", 30, seed=7, space=stump_space)
        df = hyperparameter_influence(trials)
        assert list(df.columns) == ["param", "value", "mean_objective", "count"]
        eta = df[df["param"] == "eta"]
        assert int(eta["count"].sum()) == 30
        for _, row in eta.iterrows():
            assert row["mean_objective"] == (1.0 if row["value"] == "0.5" else 0.0)

    def test_write_search(self, split, stump_space, tmp_path):
        best, trials = run_search_offline(split, "GBT", 10, seed=8, space=stump_space)
        paths = write_search(best, trials, tmp_path)
        assert [p.rsplit("/", 1)[-1] for p in paths] == ["trials.csv", "best_spec.json", "influence.csv"]
        with open(paths[1]) as f:
            assert json.load(f)["model"] == "GBT"
        assert spec_from_file(paths[1], stump_space) == best
        assert len((tmp_path / "trials.csv").read_text().splitlines()) == 11
