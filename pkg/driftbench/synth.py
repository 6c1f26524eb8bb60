"""
A generator of drifting, labeled binary-feature datasets for experiments
that cannot use a real malware corpus.

The feature space is cut into four equal blocks: benign-indicative,
malware-indicative (partitioned among families), a reserve block that
malware migrates to under drift, and noise. Every sample activates noise
features with a small probability and the features of its class with a
larger one. Drift comes in two forms:

* gradual: each month a further ``drift_rate`` fraction of the
  malware-indicative features is replaced by reserve features;
* abrupt: from month ``drift_month`` on, malware uses reserve features
  only and mimics the benign block.

A ``dupe_rate`` fraction of the samples copies the feature vector of an
earlier sample of the same class (and family when one exists).
"""
import logging
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np
import scipy.sparse as sp

from .const import BENIGN, MALWARE
from .dataset import Dataset
from .exceptions import SpecificationError
from .numerics.rng import RngStream
from .utils import month_range

logger = logging.getLogger(__name__)

_NOISE_P = 0.02
_BENIGN_P = 0.3
_SHARED_P = 0.2
_FAMILY_P = 0.6


@dataclass
class SynthConfig:
    months: int = 24
    start: str = "2019-01"
    dimension: int = 200
    per_month: int = 200
    malware_prior: float = 0.2
    families: int = 5
    drift_rate: float = 0.0
    drift_month: Optional[int] = None
    dupe_rate: float = 0.0
    seed: int = 0
    month_labels: List[str] = field(init=False, default_factory=list)

    def __post_init__(self):
        if self.months <= 0:
            raise SpecificationError("months should be positive int.")
        if self.dimension < 8:
            raise SpecificationError("dimension should be at least 8.")
        if self.per_month < 2:
            raise SpecificationError("per_month should be at least 2.")
        if not 0.0 < self.malware_prior < 1.0:
            raise SpecificationError("malware_prior should be in (0, 1).")
        if self.families < 0:
            raise SpecificationError("families should be non-negative int.")
        if not 0.0 <= self.drift_rate <= 1.0:
            raise SpecificationError("drift_rate should be in [0, 1].")
        if self.drift_month is not None and not 0 <= self.drift_month < self.months:
            raise SpecificationError("drift_month should be a month index.")
        if not 0.0 <= self.dupe_rate < 1.0:
            raise SpecificationError("dupe_rate should be in [0, 1).")
        self.month_labels = month_range(self.start, self.months)


def _class_counts(config: SynthConfig) -> tuple:
    n_malware = int(round(config.per_month * config.malware_prior))
    n_malware = min(max(n_malware, 1), config.per_month - 1)
    return config.per_month - n_malware, n_malware


def synthesize(config: SynthConfig) -> Dataset:
    """
    Generates a dataset from a config. The output depends only on the
    config (seed included).

    Args:
        config (SynthConfig): Generator settings.
    Returns:
        Dataset: The generated dataset named ``synth``.
    """
    n = config.dimension
    block = n // 4
    benign_block = np.arange(0, block)
    malware_block = np.arange(block, 2 * block)
    reserve_block = np.arange(2 * block, 3 * block)
    n_fam = max(config.families, 1)
    fam_of_feature = np.arange(block) % n_fam

    rng = RngStream(config.seed).child("synth")
    flip_order = rng.permutation(block)
    n_benign, n_malware = _class_counts(config)

    rows: List[np.ndarray] = []
    labels: List[int] = []
    families: List[int] = []
    month_index: List[int] = []
    earlier = {}
    for t in range(config.months):
        mrng = rng.child(f"month-{t}")
        abrupt = config.drift_month is not None and t >= config.drift_month
        n_flipped = block if abrupt else min(block, int(config.drift_rate * t * block))
        malware_cols = malware_block.copy()
        malware_cols[flip_order[:n_flipped]] = reserve_block[flip_order[:n_flipped]]

        y = np.array([BENIGN] * n_benign + [MALWARE] * n_malware)
        y = y[mrng.permutation(y.size)]
        fam = np.where(y == MALWARE, mrng.integers(0, n_fam, y.size), -1) if config.families > 0 else np.full(y.size, -1)

        p = np.full((y.size, n), _NOISE_P)
        is_benign = y == BENIGN
        p[np.ix_(is_benign, benign_block)] = _BENIGN_P
        for i in np.flatnonzero(~is_benign):
            own = fam_of_feature == max(fam[i], 0) if config.families > 0 else np.ones(block, dtype=bool)
            p[i, malware_cols] = np.where(own, _FAMILY_P, _SHARED_P)
            if abrupt:
                p[i, benign_block] = _BENIGN_P
        dense = mrng.random((y.size, n)) < p
        dupes = mrng.random(y.size) < config.dupe_rate
        picks = mrng.random(y.size)

        x = sp.csr_matrix(dense)
        for i in range(y.size):
            key = (int(y[i]), int(fam[i]))
            pool = earlier.get(key) or earlier.get((int(y[i]), None))
            if dupes[i] and pool:
                row = pool[int(picks[i] * len(pool))]
            else:
                row = x.indices[x.indptr[i] : x.indptr[i + 1]].astype(np.int32)
            rows.append(row)
            earlier.setdefault(key, []).append(row)
            earlier.setdefault((int(y[i]), None), []).append(row)
        labels.extend(int(v) for v in y)
        families.extend(int(v) for v in fam)
        month_index.extend([t] * y.size)

    indptr = np.zeros(len(rows) + 1, dtype=np.int64)
    np.cumsum([r.size for r in rows], out=indptr[1:])
    indices = np.concatenate(rows) if rows else np.zeros(0, dtype=np.int32)
    logger.info(
        "Generated %d samples over %d months (dimension %d).", len(rows), config.months, n
    )
    return Dataset(
        n,
        config.month_labels,
        indptr,
        indices,
        np.array(labels, dtype=np.int8),
        np.array(families, dtype=np.int32),
        np.array(month_index, dtype=np.int32),
        name="synth",
        family_names=tuple(f"family{i}" for i in range(config.families)),
    )
