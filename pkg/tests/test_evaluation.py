# pylint: disable=R0201, R0904, W0621
# R0201: Method could be a function
# R0904: Too many public methods
# W0621: Redefined outer name

"""
Tests for evaluation.
"""
import math

import numpy as np
import pytest

from driftbench import (
    ModelSpec,
    MonthMetrics,
    RunReport,
    SpecificationError,
    SynthConfig,
    aggregate_seeds,
    month_metrics,
    pooled_metrics,
    read_report,
    run_offline,
    split_by_counts,
    synthesize,
    write_report,
)

from .utils import monthly_dataset, tiny_spec


def _report(values, months=None):
    months = months or [f"2020-{i + 1:02d}" for i in range(len(values))]
    res = []
    for m, (tp, fp, tn, fn) in zip(months, values):
        res.append(MonthMetrics.from_counts(m, tp, fp, tn, fn))
    return RunReport(res, model="SVM")


class TestEvaluation:
    """
    Tests for month_metrics, RunReport, aggregate_seeds and run_offline.
    """

    def test_month_metrics_perfect(self):
        m = month_metrics([0.9, 0.8, 0.1, 0.2], [1, 1, 0, 0], "2020-01")
        assert (m.f1, m.fpr, m.fnr) == (1.0, 0.0, 0.0)
        assert (m.tp, m.fp, m.tn, m.fn) == (2, 0, 2, 0)
        assert m.flag == ""

    def test_month_metrics_threshold_is_strict(self):
        m = month_metrics([0.5, 0.5], [1, 0], "2020-01")
        assert (m.tp, m.fp, m.tn, m.fn) == (0, 0, 1, 1)

    def test_month_metrics_mostly_missed_malware(self):
        preds = [0.0] * 348 + [1.0] * 37 + [0.0] * 100
        labels = [1] * 385 + [0] * 100
        m = month_metrics(preds, labels, "2020-01")
        assert m.fnr == pytest.approx(348 / 385)
        assert round(m.fnr, 3) == 0.904
        assert m.fpr == 0.0

    def test_month_metrics_mostly_caught_malware(self):
        preds = [1.0] * 348 + [0.0] * 37
        m = month_metrics(preds, [1] * 385, "2020-01")
        assert round(m.fnr, 3) == 0.096
        assert m.flag == "no_benign"

    @pytest.mark.parametrize(
        "counts, flag, f1, fpr, fnr",
        [
            ((0, 0, 5, 0), "no_malware", 1.0, 0.0, 0.0),
            ((0, 2, 3, 0), "no_malware", 0.0, 0.4, 0.0),
            ((3, 0, 0, 1), "no_benign", 6.0 / 7.0, 0.0, 0.25),
            ((0, 0, 0, 0), "no_malware;no_benign", 1.0, 0.0, 0.0),
        ],
    )
    def test_degenerate_months(self, counts, flag, f1, fpr, fnr):
        m = MonthMetrics.from_counts("2020-01", *counts)
        assert m.flag == flag
        assert m.degenerate
        assert (m.f1, m.fpr, m.fnr) == pytest.approx((f1, fpr, fnr))

    def test_month_metrics_with_length_mismatch(self):
        with pytest.raises(SpecificationError) as err:
            month_metrics([0.5], [1, 0], "2020-01")
            pytest.fail("month_metrics() should fail.")
        assert "predictions and labels should have the same length." in str(err.value)

    def test_report_means_and_flags(self):
        report = _report([(1, 0, 1, 0), (0, 0, 2, 0)])
        assert report.means() == {"f1": 1.0, "fpr": 0.0, "fnr": 0.0}
        assert report.flagged() == ["2020-02"]
        assert list(report.to_frame().columns) == ["month", "f1", "fpr", "fnr", "tp", "fp", "tn", "fn", "flag"]

    def test_report_with_unknown_metric(self):
        with pytest.raises(SpecificationError) as err:
            _report([(1, 0, 1, 0)]).mean("auc")
            pytest.fail("mean() should fail.")
        assert "Unknown metric: auc." in str(err.value)

    def test_aggregate_seeds(self):
        # F1 of 0.6 and 0.8 over the same single month.
        a = _report([(3, 2, 5, 2)])
        b = _report([(4, 1, 5, 1)])
        assert a.mean("f1") == pytest.approx(0.6)
        assert b.mean("f1") == pytest.approx(0.8)
        agg = aggregate_seeds([a, b])
        assert agg.mean["f1"] == pytest.approx(0.7)
        assert agg.std["f1"] == pytest.approx(0.1)
        assert agg.per_month["f1_mean"].tolist() == pytest.approx([0.7])

    def test_aggregate_single_seed(self):
        agg = aggregate_seeds([_report([(3, 2, 5, 2), (1, 0, 1, 0)])])
        assert agg.std == {"f1": 0.0, "fpr": 0.0, "fnr": 0.0}

    @pytest.mark.parametrize(
        "reports, msg",
        [
            ([], "reports should not be empty."),
            (
                [_report([(1, 0, 1, 0)]), _report([(1, 0, 1, 0)], months=["2020-02"])],
                "reports should share one month axis.",
            ),
        ],
    )
    def test_aggregate_with_invalid_args(self, reports, msg):
        with pytest.raises(SpecificationError) as err:
            aggregate_seeds(reports)
            pytest.fail("aggregate_seeds() should fail.")
        assert msg in str(err.value)

    def test_pooled_differs_from_mean(self):
        report = _report([(1, 0, 1, 1), (90, 0, 10, 0)])
        pooled = pooled_metrics(report)
        assert pooled.month == "pooled"
        assert (pooled.tp, pooled.fn) == (91, 1)
        assert pooled.fnr == pytest.approx(1 / 92)
        assert report.mean("fnr") == pytest.approx(0.25)

    def test_run_offline(self):
        split = split_by_counts(monthly_dataset(6, 20, seed=3), 2, 1, 3)
        report = run_offline(split, tiny_spec("GBT", num_boost_round=10), "merged", seed=0)
        assert report.month_labels == ["2020-04", "2020-05", "2020-06"]
        assert report.setting == "offline-merged"
        assert report.metadata["n_train"] == 60
        assert all(m.tp + m.fp + m.tn + m.fn == 20 for m in report.months)

    def test_merged_equals_holdout_without_validation(self):
        split = split_by_counts(monthly_dataset(5, 20, seed=4), 2, 0, 3)
        spec = tiny_spec("GBT", num_boost_round=5)
        merged = run_offline(split, spec, "merged", seed=1)
        holdout = run_offline(split, spec, "holdout", seed=1)
        assert merged.months == holdout.months

    def test_run_offline_is_reproducible(self):
        split = split_by_counts(monthly_dataset(4, 16, seed=5), 2, 0, 2)
        a = run_offline(split, tiny_spec("MLP", epochs=3), "holdout", seed=2)
        b = run_offline(split, tiny_spec("MLP", epochs=3), "holdout", seed=2)
        assert a.months == b.months

    def test_run_offline_does_not_depend_on_jobs(self):
        split = split_by_counts(monthly_dataset(4, 16, seed=7), 2, 1, 1)
        serial = run_offline(split, ModelSpec.new("RF"), "merged", seed=4)
        parallel = run_offline(split, ModelSpec.new("RF"), "merged", seed=4, jobs=2)
        assert serial.months == parallel.months

    @pytest.mark.parametrize(
        "kind, params",
        [
            ("RF", {}),
            ("SVM", {}),
            ("GBT", {"num_boost_round": 20, "max_depth": 4}),
            ("MLP", {}),
            ("SCC", {}),
            ("HCC", {}),
        ],
    )
    def test_merged_not_worse_than_holdout_without_drift(self, kind, params):
        config = SynthConfig(months=10, dimension=80, per_month=100, malware_prior=0.3, families=2, seed=5)
        split = split_by_counts(synthesize(config), 3, 1, 6)
        spec = tiny_spec(kind, **params)
        merged = run_offline(split, spec, "merged", seed=0)
        holdout = run_offline(split, spec, "holdout", seed=0)
        assert merged.mean("f1") >= holdout.mean("f1") - 0.01

    @pytest.mark.parametrize(
        "n_test, setting, msg",
        [
            (0, "merged", "test split should hold at least one sample."),
            (2, "online", "Unknown offline setting: online."),
        ],
    )
    def test_run_offline_with_invalid_args(self, n_test, setting, msg):
        split = split_by_counts(monthly_dataset(4, 8, seed=6), 2, 0, n_test)
        with pytest.raises(SpecificationError) as err:
            run_offline(split, tiny_spec("GBT", num_boost_round=1), setting)
            pytest.fail("run_offline() should fail.")
        assert msg in str(err.value)

    def test_write_and_read_report(self, tmp_path):
        report = _report([(3, 2, 5, 2), (0, 0, 4, 0), (7, 1, 1, 0)])
        paths = write_report(report, tmp_path)
        assert sorted(p.rsplit("/", 1)[-1] for p in paths) == ["per_month.csv", "summary.csv"]
        restored = read_report(tmp_path)
        assert restored.months == report.months
        summary = (tmp_path / "summary.csv").read_text().splitlines()
        assert summary[0] == "metric,mean,std"
        assert summary[1].startswith("f1,")

    def test_write_aggregate(self, tmp_path):
        agg = aggregate_seeds([_report([(3, 2, 5, 2)]), _report([(4, 1, 5, 1)])])
        write_report(agg, tmp_path)
        lines = (tmp_path / "per_month_mean_std.csv").read_text().splitlines()
        assert lines[0] == "month,f1_mean,f1_std,fpr_mean,fpr_std,fnr_mean,fnr_std"
        assert lines[1].startswith("2020-01,0.700000,0.100000")

    def test_read_report_without_file(self, tmp_path):
        with pytest.raises(SpecificationError) as err:
            read_report(tmp_path)
            pytest.fail("read_report() should fail.")
        assert "per_month.csv not found" in str(err.value)

    def test_nan_mean_for_empty_report(self):
        assert math.isnan(RunReport([]).mean("f1"))
        assert np.isnan(RunReport([]).means()["fpr"])
