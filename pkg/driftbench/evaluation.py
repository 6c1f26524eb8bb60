import logging
import os
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from .const import CSV_FLOAT_FORMAT, DECISION_THRESHOLD, MALWARE, METRIC_NAMES, OFFLINE_SETTINGS
from .dataset import Dataset, SplitDataset
from .exceptions import SpecificationError
from .model import Model
from .model_interface import ModelInterface
from .model_spec import ModelSpec

logger = logging.getLogger(__name__)

PER_MONTH_COLUMNS = ["month", "f1", "fpr", "fnr", "tp", "fp", "tn", "fn", "flag"]


def _rates(tp: int, fp: int, tn: int, fn: int) -> Tuple[float, float, float, str]:
    flags = []
    if tp + fn == 0:
        flags.append("no_malware")
        fnr = 0.0
        f1 = 1.0 if fp == 0 else 0.0
    else:
        fnr = fn / (fn + tp)
        f1 = 2.0 * tp / (2.0 * tp + fp + fn)
    if fp + tn == 0:
        flags.append("no_benign")
        fpr = 0.0
    else:
        fpr = fp / (fp + tn)
    return f1, fpr, fnr, ";".join(flags)


@dataclass(frozen=True)
class MonthMetrics:
    """
    Confusion counts and F1/FPR/FNR of one month, malware being the positive
    class. ``flag`` names the empty denominator classes of a degenerate month
    (``no_malware``, ``no_benign``) and is empty otherwise.
    """

    month: str
    tp: int
    fp: int
    tn: int
    fn: int
    f1: float
    fpr: float
    fnr: float
    flag: str = ""

    @classmethod
    def from_counts(cls, month: str, tp: int, fp: int, tn: int, fn: int) -> "MonthMetrics":
        f1, fpr, fnr, flag = _rates(tp, fp, tn, fn)
        return cls(month, int(tp), int(fp), int(tn), int(fn), f1, fpr, fnr, flag)

    @property
    def degenerate(self) -> bool:
        return self.flag != ""

    def to_dict(self) -> Dict[str, Any]:
        return {c: getattr(self, c) for c in PER_MONTH_COLUMNS}


def month_metrics(predictions: Sequence[float], labels: Sequence[int], month: str) -> MonthMetrics:
    """
    Computes the metrics of one month from malware probabilities, thresholded
    at ``p > 0.5``.

    Args:
        predictions (Sequence[float]): Malware probabilities.
        labels (Sequence[int]): True labels.
        month (str): The month label.
    Returns:
        MonthMetrics: The month metrics.
    Raises:
        SpecificationError: Length mismatch.
    """
    p = np.asarray(predictions, dtype=np.float64).reshape(-1)
    y = np.asarray(labels).reshape(-1)
    if p.size != y.size:
        raise SpecificationError("predictions and labels should have the same length.")
    pred = p > DECISION_THRESHOLD
    truth = y == MALWARE
    res = MonthMetrics.from_counts(
        month,
        int(np.count_nonzero(pred & truth)),
        int(np.count_nonzero(pred & ~truth)),
        int(np.count_nonzero(~pred & ~truth)),
        int(np.count_nonzero(~pred & truth)),
    )
    if res.degenerate:
        logger.warning("Degenerate month %s: %s.", month, res.flag)
    return res


def evaluate_months(model: ModelInterface, data: Dataset) -> List[MonthMetrics]:
    """
    Evaluates a model on every non-empty month of ``data``.
    """
    counts = data.month_counts()
    res = []
    for pos, month in enumerate(data.months):
        if counts[pos] == 0:
            logger.warning("Month %s has no samples; skipped.", month)
            continue
        part = data.month_slice(pos)
        res.append(month_metrics(model.predict_proba(part), part.labels, month))
    return res


@dataclass
class RunReport:
    """
    Per-month metrics of one run and their unweighted cross-month means.
    """

    months: List[MonthMetrics]
    model: str = ""
    seed: Optional[int] = None
    setting: str = ""
    metadata: Dict[str, Any] = field(default_factory=dict)

    @property
    def month_labels(self) -> List[str]:
        return [m.month for m in self.months]

    def mean(self, metric: str) -> float:
        if metric not in METRIC_NAMES:
            raise SpecificationError(f"Unknown metric: {metric}.")
        if not self.months:
            return float("nan")
        return float(np.mean([getattr(m, metric) for m in self.months]))

    def means(self) -> Dict[str, float]:
        return {k: self.mean(k) for k in METRIC_NAMES}

    def flagged(self) -> List[str]:
        return [m.month for m in self.months if m.degenerate]

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame([m.to_dict() for m in self.months], columns=PER_MONTH_COLUMNS)


@dataclass
class SeedAggregate:
    """
    Mean and population standard deviation over seed runs of the cross-month
    averages, and of every month's metrics.
    """

    reports: List[RunReport]
    mean: Dict[str, float]
    std: Dict[str, float]
    per_month: pd.DataFrame

    def to_frames(self) -> Tuple[pd.DataFrame, pd.DataFrame]:
        """
        Returns the ``metric,mean,std`` summary frame and the per-month
        ``month,<metric>_mean,<metric>_std`` frame.
        """
        summary = pd.DataFrame(
            {
                "metric": METRIC_NAMES,
                "mean": [self.mean[k] for k in METRIC_NAMES],
                "std": [self.std[k] for k in METRIC_NAMES],
            }
        )
        return summary, self.per_month.copy()


def aggregate_seeds(reports: Sequence[RunReport]) -> SeedAggregate:
    """
    Aggregates runs that differ only by seed.

    Args:
        reports (Sequence[RunReport]): At least one report; all over the same
            months.
    Returns:
        SeedAggregate: The aggregate.
    Raises:
        SpecificationError: No reports or mismatching month axes.
    """
    reports = list(reports)
    if not reports:
        raise SpecificationError("reports should not be empty.")
    axis = reports[0].month_labels
    for r in reports[1:]:
        if r.month_labels != axis:
            raise SpecificationError("reports should share one month axis.")
    averages = np.array([[r.mean(k) for k in METRIC_NAMES] for r in reports])
    mean = {k: float(v) for k, v in zip(METRIC_NAMES, averages.mean(axis=0))}
    std = {k: float(v) for k, v in zip(METRIC_NAMES, averages.std(axis=0))}
    cols: Dict[str, Any] = {"month": axis}
    for k in METRIC_NAMES:
        values = np.array([[getattr(m, k) for m in r.months] for r in reports]).reshape(len(reports), len(axis))
        cols[f"{k}_mean"] = values.mean(axis=0)
        cols[f"{k}_std"] = values.std(axis=0)
    return SeedAggregate(reports, mean, std, pd.DataFrame(cols))


def pooled_metrics(report: RunReport) -> MonthMetrics:
    """
    Returns the metrics of the confusion counts pooled over all months. This
    differs from the cross-month mean whenever months differ in size.
    """
    tp = sum(m.tp for m in report.months)
    fp = sum(m.fp for m in report.months)
    tn = sum(m.tn for m in report.months)
    fn = sum(m.fn for m in report.months)
    return MonthMetrics.from_counts("pooled", tp, fp, tn, fn)


def run_offline(
    split: SplitDataset, spec: ModelSpec, setting: str = "merged", seed: int = 0, jobs: int = 1
) -> RunReport:
    """
    Fits once and evaluates every test month.

    Args:
        split (SplitDataset): The split dataset.
        spec (ModelSpec): The chosen hyperparameters.
        setting (str): ``merged`` fits on train and validation, ``holdout``
            on train only.
        seed (int): The run seed.
        jobs (int): Parallel workers for the fit.
    Returns:
        RunReport: The per-month report.
    Raises:
        SpecificationError: Unknown setting or no test months.
    """
    if setting not in OFFLINE_SETTINGS:
        raise SpecificationError(f"Unknown offline setting: {setting}.")
    if len(split.test) == 0:
        raise SpecificationError("test split should hold at least one sample.")
    train = split.train
    if setting == "merged" and len(split.validation) > 0:
        train = Dataset.concat([split.train, split.validation])
    logger.info("Offline %s run of %s (seed %d) on %d samples.", setting, spec.kind, seed, len(train))
    model = Model.fit(spec, train, seed, jobs)
    return RunReport(
        evaluate_months(model, split.test),
        model=spec.kind,
        seed=seed,
        setting=f"offline-{setting}",
        metadata={"n_train": len(train)},
    )


def _write_frame(df: pd.DataFrame, path: str) -> str:
    df.to_csv(path, index=False, float_format=CSV_FLOAT_FORMAT, lineterminator="\n")
    return path


def write_report(
    report: Union[RunReport, SeedAggregate], directory: Union[str, os.PathLike]
) -> List[str]:
    """
    Writes ``per_month.csv`` and ``summary.csv`` for a run, or
    ``summary.csv`` and ``per_month_mean_std.csv`` for a seed aggregate.

    Returns:
        List[str]: The written paths.
    """
    directory = os.fspath(directory)
    os.makedirs(directory, exist_ok=True)
    if isinstance(report, SeedAggregate):
        summary, per_month = report.to_frames()
        return [
            _write_frame(summary, os.path.join(directory, "summary.csv")),
            _write_frame(per_month, os.path.join(directory, "per_month_mean_std.csv")),
        ]
    summary, _ = aggregate_seeds([report]).to_frames()
    return [
        _write_frame(report.to_frame(), os.path.join(directory, "per_month.csv")),
        _write_frame(summary, os.path.join(directory, "summary.csv")),
    ]


def read_report(directory: Union[str, os.PathLike]) -> RunReport:
    """
    Reloads a report written by :func:`write_report`. Rates are recomputed
    from the confusion counts, so they equal the in-memory values exactly.

    Raises:
        SpecificationError: Missing or malformed ``per_month.csv``.
    """
    path = os.path.join(os.fspath(directory), "per_month.csv")
    if not os.path.exists(path):
        raise SpecificationError(f"per_month.csv not found in {os.fspath(directory)}.")
    df = pd.read_csv(path, dtype={"month": str, "flag": str}, keep_default_na=False)
    missing = [c for c in ("month", "tp", "fp", "tn", "fn") if c not in df.columns]
    if missing:
        raise SpecificationError(f"per_month.csv should have column {missing[0]}.")
    months = [
        MonthMetrics.from_counts(str(r.month), int(r.tp), int(r.fp), int(r.tn), int(r.fn))
        for r in df.itertuples(index=False)
    ]
    return RunReport(months, metadata={"source": os.fspath(directory)})
