from typing import List, Optional, Sequence, Tuple

import numpy as np

from driftbench import Dataset, FeatureVector, ModelInterface, ModelSpec, SearchSpace, SplitDataset
from driftbench.numerics.rng import RngStream
from driftbench.search_space import Constant
from driftbench.utils import month_range

Row = Tuple[str, int, int, Sequence[int]]

# Small networks keep the neural tests fast.
TINY_PARAMS = {
    "MLP": {"mlp_layers": [8], "epochs": 30, "batch_size": 8, "lr": 0.01, "dropout": 0.0},
    "SCC": {
        "encoder_layers": [8, 4],
        "mlp_layers": [4],
        "epochs": 30,
        "batch_size": 8,
        "lr": 0.01,
        "dropout": 0.0,
        "xent_lambda": 1.0,
        "margin": 1.0,
    },
    "HCC": {
        "encoder_layers": [8, 4],
        "mlp_layers": [4],
        "epochs": 30,
        "batch_size": 8,
        "lr": 0.01,
        "dropout": 0.0,
        "xent_lambda": 1.0,
        "margin": 1.0,
        "cont_learning_epochs": 5,
        "cont_learning_lr": 0.01,
    },
}


def tiny_spec(kind: str, **params) -> ModelSpec:
    """
    Returns a spec whose values may lie outside the standard search space.
    """
    values = dict(TINY_PARAMS.get(kind, {}))
    values.update(params)
    space = SearchSpace.table(kind).override(**{k: Constant(v) for k, v in values.items()})
    return ModelSpec.new(kind, values, space)


def make_dataset(rows: Sequence[Row], dimension: int = 10) -> Dataset:
    return Dataset.from_rows(dimension, rows, name="test")


def vectors(dimension: int, *index_lists: Sequence[int]) -> List[FeatureVector]:
    return [FeatureVector.new(dimension, idx) for idx in index_lists]


def monthly_dataset(
    months: int,
    per_month: int,
    dimension: int = 12,
    seed: int = 0,
    start: str = "2020-01",
    families: int = 2,
) -> Dataset:
    """
    Random separable-ish data: malware activates features in the upper half
    of the space, benign in the lower half, every month holding both classes.
    """
    rng = RngStream(seed)
    labels = month_range(start, months)
    half = dimension // 2
    rows: List[Row] = []
    for t, month in enumerate(labels):
        for i in range(per_month):
            label = i % 2
            base = half if label == 1 else 0
            active = [base + int(j) for j in np.flatnonzero(rng.random(half) < 0.5)]
            if not active:
                active = [base + int(rng.integers(0, half))]
            family = (i // 2 + t) % families if label == 1 and families > 0 else -1
            rows.append((month, label, family, active))
    return Dataset.from_rows(dimension, rows, name="monthly")


def xor_dataset(copies: int = 50) -> Dataset:
    rows: List[Row] = []
    for _ in range(copies):
        rows.append(("2020-01", 0, -1, []))
        rows.append(("2020-01", 1, 0, [0]))
        rows.append(("2020-01", 1, 1, [1]))
        rows.append(("2020-01", 0, -1, [0, 1]))
    return Dataset.from_rows(2, rows, name="xor")


def separable_dataset(copies: int = 4) -> Dataset:
    rows: List[Row] = []
    for _ in range(copies):
        rows.append(("2020-01", 0, -1, [0]))
        rows.append(("2020-01", 1, 0, [1]))
    return Dataset.from_rows(2, rows, name="separable")


def pool_dataset(n: int, pool_size: int, dimension: int, seed: int, months: int = 1) -> Dataset:
    """
    ``n`` samples whose vectors are drawn from a pool of ``pool_size``
    distinct random vectors, spread over ``months`` months.
    """
    rng = RngStream(seed)
    pool = []
    seen = set()
    while len(pool) < pool_size:
        idx = tuple(int(i) for i in np.flatnonzero(rng.random(dimension) < 0.3))
        if idx in seen:
            continue
        seen.add(idx)
        pool.append(list(idx))
    labels = month_range("2020-01", months)
    rows: List[Row] = []
    for i in range(n):
        month = labels[min(i * months // n, months - 1)]
        label = int(rng.integers(0, 2))
        rows.append((month, label, -1, pool[int(rng.integers(0, pool_size))]))
    return Dataset.from_rows(dimension, rows, name="pool")


def brute_force_intra(ds: Dataset, start: int = 0, stop: Optional[int] = None) -> List[int]:
    """
    Quadratic reference: the earliest identical position in ``[start, stop)``.
    """
    stop = len(ds) if stop is None else stop
    res = []
    for i in range(start, stop):
        match = -1
        for j in range(start, i):
            if ds.features(j) == ds.features(i):
                match = j
                break
        res.append(match)
    return res


def retained_vectors(ds: Dataset) -> List[Tuple[int, ...]]:
    return [tuple(int(i) for i in ds.features(k).indices) for k in range(len(ds))]


def split_of(train: Dataset, validation: Dataset, test: Dataset) -> SplitDataset:
    return SplitDataset(train, validation, test)


class FixedModel(ModelInterface):
    """
    A fitted stand-in returning fixed malware probabilities, one per row.
    """

    def __init__(self, probs: Sequence[float], dimension: int = 2):
        super().__init__(ModelSpec.new("SVM"))
        self._dimension = dimension
        self._probs = np.asarray(probs, dtype=np.float64)

    def _predict_proba(self, x) -> np.ndarray:
        return self._probs[: x.shape[0]].copy()


class FeatureEmbeddingModel(FixedModel):
    """
    A fitted HCC stand-in with fixed probabilities whose embedding is the
    binary feature vector itself.
    """

    def __init__(self, probs: Sequence[float], dimension: int, spec: ModelSpec):
        super().__init__(probs, dimension)
        self._spec = spec

    def embed(self, features) -> np.ndarray:
        return self._as_matrix(features).toarray().astype(np.float64)
