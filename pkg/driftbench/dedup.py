import logging
import math
import os
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Union

import numpy as np
import pandas as pd

from .const import BENIGN, CLASS_NAMES, CSV_FLOAT_FORMAT, DEDUP_MODES, MALWARE, SPLIT_NAMES
from .dataset import Dataset, DuplicateAnnotation, FeatureVector, Sample, SplitDataset
from .exceptions import SpecificationError

logger = logging.getLogger(__name__)

Samples = Union[Dataset, Sequence[Union[Sample, FeatureVector]]]


def _keys_of(samples: Samples) -> List[bytes]:
    if isinstance(samples, Dataset):
        return samples.keys()
    dims = set()
    keys = []
    for s in samples:
        fv = s.features if isinstance(s, Sample) else s
        dims.add(fv.dimension)
        keys.append(fv.key())
    if len(dims) > 1:
        raise SpecificationError("all samples should share one dimension.")
    return keys


def _first_occurrence(keys: Sequence[bytes], start: int = 0, stop: Optional[int] = None) -> np.ndarray:
    stop = len(keys) if stop is None else stop
    intra = np.full(stop - start, -1, dtype=np.int64)
    seen: Dict[bytes, int] = {}
    for i in range(start, stop):
        j = seen.setdefault(keys[i], i)
        if j != i:
            intra[i - start] = j
    return intra


def find_duplicates(samples: Samples) -> DuplicateAnnotation:
    """
    Finds exact duplicates by feature vector (labels and families are
    ignored). ``intra[i]`` is the smallest ``j < i`` with identical features.

    Args:
        samples (Samples): A Dataset or a sequence of Sample/FeatureVector.
    Returns:
        DuplicateAnnotation: Intra links; no cross links.
    Raises:
        SpecificationError: Mixed dimensions.
    """
    keys = _keys_of(samples)
    res = DuplicateAnnotation.none(len(keys))
    res.intra = _first_occurrence(keys)
    return res


def _annotate_monthly(ds: Dataset) -> DuplicateAnnotation:
    keys = ds.keys()
    res = DuplicateAnnotation.none(len(ds))
    for m in range(len(ds.months)):
        start, stop = ds.month_bounds(m)
        intra = _first_occurrence(keys, start, stop)
        res.intra[start:stop] = intra
    return res


def annotate(split: SplitDataset, mode: str) -> SplitDataset:
    """
    Computes the duplicate annotation of every split for a dedup mode.

    ``offline``: intra links over each whole split plus cross links to the
    first occurrence in the earliest earlier split holding the vector.
    ``active``: intra links over the whole training split and within each
    month of validation and test; no cross links.

    Args:
        split (SplitDataset): The split dataset.
        mode (str): ``"offline"`` or ``"active"``.
    Returns:
        SplitDataset: The same sections carrying the annotations.
    """
    if mode not in DEDUP_MODES:
        raise SpecificationError(f"Unknown dedup mode: {mode}.")
    annotations: Dict[str, DuplicateAnnotation] = {}
    earlier: List[Dict[bytes, int]] = []
    for name, ds in split.items():
        keys = ds.keys()
        if mode == "active" and name != "train":
            annotations[name] = _annotate_monthly(ds)
            continue
        ann = DuplicateAnnotation.none(len(ds))
        ann.intra = _first_occurrence(keys)
        if mode == "offline":
            for i, k in enumerate(keys):
                for sid, table in enumerate(earlier):
                    if k in table:
                        ann.cross_split[i] = sid
                        ann.cross_index[i] = table[k]
                        break
            first: Dict[bytes, int] = {}
            for i, k in enumerate(keys):
                first.setdefault(k, i)
            earlier.append(first)
        annotations[name] = ann
    return SplitDataset(
        split.train,
        split.validation,
        split.test,
        mode=mode,
        annotations=annotations,
        provenance={k: v.copy() for k, v in split.provenance.items()},
    )


def _label_conflicts(split: SplitDataset) -> int:
    count = 0
    for name, ds in split.items():
        ann = split.annotations[name]
        dup = np.flatnonzero(ann.intra >= 0)
        count += int(np.count_nonzero(ds.labels[dup] != ds.labels[ann.intra[dup]]))
        for i in np.flatnonzero(ann.cross_split >= 0):
            other = split.get(SPLIT_NAMES[int(ann.cross_split[i])])
            if other.labels[ann.cross_index[i]] != ds.labels[i]:
                count += 1
    return count


def _dedup(split: SplitDataset, mode: str) -> SplitDataset:
    annotated = annotate(split, mode)
    conflicts = _label_conflicts(annotated)
    if conflicts:
        logger.warning("%d label-conflicting duplicates removed (%s mode).", conflicts, mode)
    parts = {}
    provenance = {}
    for name, ds in annotated.items():
        keep = np.flatnonzero(annotated.annotations[name].unique_mask())
        parts[name] = ds.subset(keep)
        provenance[name] = annotated.provenance[name][keep]
        logger.info("%s: kept %d of %d samples.", name, keep.size, len(ds))
    return SplitDataset(
        parts["train"],
        parts["validation"],
        parts["test"],
        mode=mode,
        annotations={name: DuplicateAnnotation.none(len(d)) for name, d in parts.items()},
        provenance=provenance,
    )


def dedup_offline(split: SplitDataset) -> SplitDataset:
    """
    Offline deduplication: keeps only the earliest occurrence of every vector
    across train, validation and test, so all retained samples are pairwise
    distinct. Provenance maps point at the original input positions.
    """
    return _dedup(split, "offline")


def dedup_active(split: SplitDataset) -> SplitDataset:
    """
    Active-learning deduplication: train is deduplicated as a whole; in
    validation and test duplicates are removed within each month only, so a
    vector may recur across months and splits.
    """
    return _dedup(split, "active")


def dedup(split: SplitDataset, mode: str) -> SplitDataset:
    if mode == "offline":
        return dedup_offline(split)
    if mode == "active":
        return dedup_active(split)
    raise SpecificationError(f"Unknown dedup mode: {mode}.")


def _ratio(benign: int, malware: int) -> float:
    return math.inf if malware == 0 else benign / malware


@dataclass
class DedupReport:
    """
    Duplicate statistics of a split dataset under one dedup mode.

    ``counts`` has the columns ``split,month,class,total,retained,
    fraction_unique`` and ``ratios`` the columns ``split,month,ratio_before,
    ratio_after`` (benign/malware). Rows with month ``all`` summarize a split.
    """

    mode: str
    counts: pd.DataFrame
    ratios: pd.DataFrame
    label_conflicts: int = 0

    def fraction_unique(self, split: str, month: str, cls: Union[int, str]) -> float:
        cls_name = CLASS_NAMES[cls] if isinstance(cls, int) else cls
        rows = self.counts[
            (self.counts["split"] == split)
            & (self.counts["month"] == month)
            & (self.counts["class"] == cls_name)
        ]
        if rows.empty:
            raise SpecificationError(f"No row for {split}/{month}/{cls_name}.")
        return float(rows["fraction_unique"].iloc[0])

    def write_csv(self, directory: Union[str, os.PathLike]) -> List[str]:
        """
        Writes ``dedup_counts.csv`` and ``dedup_ratios.csv``.
        """
        os.makedirs(directory, exist_ok=True)
        out = []
        for fname, frame in (("dedup_counts.csv", self.counts), ("dedup_ratios.csv", self.ratios)):
            p = os.path.join(directory, fname)
            frame.to_csv(p, index=False, float_format=CSV_FLOAT_FORMAT, lineterminator="\n")
            out.append(p)
        return out


def dedup_stats(split: SplitDataset, mode: str) -> DedupReport:
    """
    Reports per-split, per-month and per-class totals and retained counts
    under a dedup mode, together with benign/malware ratios before and after
    deduplication.

    Args:
        split (SplitDataset): The split dataset (not yet deduplicated).
        mode (str): ``"offline"`` or ``"active"``.
    Returns:
        DedupReport: The statistics.
    """
    annotated = annotate(split, mode)
    counts = []
    ratios = []
    for name, ds in annotated.items():
        keep = annotated.annotations[name].unique_mask()
        n_months = len(ds.months)
        cell = ds.month_index.astype(np.int64) * 2 + ds.labels
        total = np.bincount(cell, minlength=2 * n_months).reshape(n_months, 2)
        retained = np.bincount(cell[keep], minlength=2 * n_months).reshape(n_months, 2)
        labels = list(ds.months) + ["all"]
        total = np.vstack([total, total.sum(axis=0, keepdims=True)])
        retained = np.vstack([retained, retained.sum(axis=0, keepdims=True)])
        for m, month in enumerate(labels):
            for cls, cls_name in CLASS_NAMES.items():
                t, r = int(total[m, cls]), int(retained[m, cls])
                counts.append(
                    {
                        "split": name,
                        "month": month,
                        "class": cls_name,
                        "total": t,
                        "retained": r,
                        "fraction_unique": r / t if t > 0 else float("nan"),
                    }
                )
            ratios.append(
                {
                    "split": name,
                    "month": month,
                    "ratio_before": _ratio(int(total[m, BENIGN]), int(total[m, MALWARE])),
                    "ratio_after": _ratio(
                        int(retained[m, BENIGN]), int(retained[m, MALWARE])
                    ),
                }
            )
    return DedupReport(
        mode,
        pd.DataFrame(counts, columns=["split", "month", "class", "total", "retained", "fraction_unique"]),
        pd.DataFrame(ratios, columns=["split", "month", "ratio_before", "ratio_after"]),
        _label_conflicts(annotated),
    )
