import math
from dataclasses import dataclass, field
from typing import Dict, Iterator, List, Optional, Sequence, Tuple, Union

import numpy as np
import scipy.sparse as sp

from .const import BENIGN, MALWARE, SPLIT_IDS
from .exceptions import RangeError, SpecificationError
from .utils import month_ordinal

MonthRange = Optional[Tuple[str, str]]


def _gather_rows(indptr: np.ndarray, rows: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """
    Returns the row pointers and the index-array positions of the CSR rows
    ``rows`` taken in the given order.
    """
    rows = np.asarray(rows, dtype=np.int64)
    lengths = indptr[rows + 1] - indptr[rows]
    new_indptr = np.zeros(rows.size + 1, dtype=np.int64)
    np.cumsum(lengths, out=new_indptr[1:])
    total = int(new_indptr[-1])
    gather = np.repeat(indptr[rows] - new_indptr[:-1], lengths) + np.arange(
        total, dtype=np.int64
    )
    return new_indptr, gather


class FeatureVector:
    """
    A binary feature vector stored as the strictly increasing sequence of its
    active indices within a fixed dimension.
    """

    __slots__ = ("_dimension", "_indices")

    def __init__(self, dimension: int, indices: Sequence[int]):
        if not isinstance(dimension, (int, np.integer)) or isinstance(dimension, bool):
            raise SpecificationError("dimension should be int.")
        if dimension <= 0:
            raise SpecificationError("dimension should be positive int.")
        arr = np.array(indices, dtype=np.int64).reshape(-1)
        if arr.size > 0:
            if np.any(np.diff(arr) <= 0):
                raise SpecificationError("indices should be strictly increasing.")
            if arr[0] < 0 or arr[-1] >= dimension:
                raise RangeError(f"index out of range [0, {dimension}).")
        arr.setflags(write=False)
        self._dimension = int(dimension)
        self._indices = arr

    @classmethod
    def new(cls, dimension: int, indices: Sequence[int]):
        """
        Creates a FeatureVector in canonical form from active indices given in
        any order. Repeated indices collapse into one since values are binary.

        Args:
            dimension (int): The feature dimension n.
            indices (Sequence[int]): Active feature indices.
        Returns:
            FeatureVector: A canonical feature vector.
        Raises:
            RangeError: An index is outside ``[0, dimension)``.
            SpecificationError: Invalid dimension.
        """
        arr = np.asarray(indices, dtype=np.int64).reshape(-1)
        bad = arr[(arr < 0) | (arr >= dimension)]
        if bad.size > 0:
            raise RangeError(f"index {bad[0]} out of range [0, {dimension}).")
        return cls(dimension, np.unique(arr))

    @property
    def dimension(self) -> int:
        return self._dimension

    @property
    def indices(self) -> np.ndarray:
        return self._indices

    def key(self) -> bytes:
        """
        Returns the duplicate key: the canonical index sequence as bytes.
        """
        return self._indices.astype("<i8").tobytes()

    def to_dense(self) -> np.ndarray:
        res = np.zeros(self._dimension, dtype=np.float64)
        res[self._indices] = 1.0
        return res

    def __len__(self) -> int:
        return int(self._indices.size)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, FeatureVector):
            return NotImplemented
        return self._dimension == other._dimension and np.array_equal(
            self._indices, other._indices
        )

    def __hash__(self) -> int:
        return hash((self._dimension, self.key()))

    def __repr__(self) -> str:
        return f"FeatureVector(dimension={self._dimension}, indices={self._indices.tolist()})"


@dataclass(frozen=True)
class Sample:
    """
    A labeled sample: features, binary label, optional malware family id and
    the index of its month on the dataset's month axis.
    """

    features: FeatureVector
    label: int
    family: Optional[int] = None
    month: int = 0

    def __post_init__(self):
        if self.label not in (BENIGN, MALWARE):
            raise SpecificationError("label should be 0(benign) or 1(malware).")
        if self.family is not None:
            if not isinstance(self.family, (int, np.integer)) or self.family < 0:
                raise SpecificationError("family should be non-negative int.")
            if self.label != MALWARE:
                raise SpecificationError("family should be set only for malware.")
        if not isinstance(self.month, (int, np.integer)) or self.month < 0:
            raise SpecificationError("month should be non-negative int.")


class Dataset:
    """
    A temporally ordered set of samples over sparse binary features.

    Samples are stored in CSR layout (row pointers and active indices) together
    with per-sample label, family (-1 for none) and month-index arrays, grouped
    by month in month-axis order. Instances are immutable.

    ``name`` and ``family_names`` are informational and do not take part in
    equality.
    """

    def __init__(
        self,
        dimension: int,
        months: Sequence[str],
        indptr: np.ndarray,
        indices: np.ndarray,
        labels: np.ndarray,
        families: np.ndarray,
        month_index: np.ndarray,
        name: str = "",
        family_names: Sequence[str] = (),
    ):
        if not isinstance(dimension, (int, np.integer)) or isinstance(dimension, bool):
            raise SpecificationError("dimension should be int.")
        if dimension <= 0:
            raise SpecificationError("dimension should be positive int.")
        months = tuple(months)
        ordinals = [month_ordinal(m) for m in months]
        if any(b <= a for a, b in zip(ordinals, ordinals[1:])):
            raise SpecificationError("months should be in strictly increasing order.")

        indptr = np.array(indptr, dtype=np.int64).reshape(-1)
        indices = np.array(indices, dtype=np.int32).reshape(-1)
        labels = np.array(labels, dtype=np.int8).reshape(-1)
        families = np.array(families, dtype=np.int32).reshape(-1)
        month_index = np.array(month_index, dtype=np.int32).reshape(-1)
        n = labels.size
        if indptr.size != n + 1 or indptr[0] != 0 or indptr[-1] != indices.size:
            raise SpecificationError("indptr should have sample-count + 1 entries.")
        if np.any(np.diff(indptr) < 0):
            raise SpecificationError("indptr should be non-decreasing.")
        if families.size != n or month_index.size != n:
            raise SpecificationError("per-sample arrays should have the same length.")
        if indices.size > 0:
            if indices.min() < 0 or indices.max() >= dimension:
                raise RangeError(f"feature index out of range [0, {dimension}).")
            # Pairs crossing a row boundary are exempt from the ordering check.
            row_start = np.zeros(indices.size, dtype=bool)
            inner = indptr[1:-1]
            row_start[inner[inner < indices.size]] = True
            if np.any((np.diff(indices.astype(np.int64)) <= 0) & ~row_start[1:]):
                raise SpecificationError("indices should be strictly increasing per sample.")
        if n > 0:
            if np.any((labels != BENIGN) & (labels != MALWARE)):
                raise SpecificationError("labels should be 0(benign) or 1(malware).")
            if np.any(families < -1):
                raise SpecificationError("family should be non-negative int or -1.")
            if np.any((families >= 0) & (labels != MALWARE)):
                raise SpecificationError("family should be set only for malware.")
            if month_index.min() < 0 or month_index.max() >= len(months):
                raise RangeError("month index out of range of the month axis.")
            if np.any(np.diff(month_index) < 0):
                raise SpecificationError("samples should be grouped by month in axis order.")

        for a in (indptr, indices, labels, families, month_index):
            a.setflags(write=False)
        self._dimension = int(dimension)
        self._months = months
        self._indptr = indptr
        self._indices = indices
        self._labels = labels
        self._families = families
        self._month_index = month_index
        self.name = name
        self.family_names = tuple(family_names)
        self._csr: Optional[sp.csr_matrix] = None
        return

    @classmethod
    def new(
        cls,
        dimension: int,
        months: Sequence[str],
        samples: Sequence[Sample],
        name: str = "",
    ):
        """
        Creates a Dataset from Sample objects. Samples are regrouped by month
        (stable, so first-read order is kept within a month).

        Args:
            dimension (int): The feature dimension n.
            months (Sequence[str]): The month axis (``YYYY-MM`` labels in
                increasing order).
            samples (Sequence[Sample]): Samples whose ``month`` index into
                ``months``.
            name (str): A free text name.
        Returns:
            Dataset: A canonical dataset.
        Raises:
            SpecificationError: Mixed dimensions or invalid samples.
            RangeError: A month index outside the axis.
        """
        for s in samples:
            if s.features.dimension != dimension:
                raise SpecificationError("all samples should share one dimension.")
            if s.month >= len(months):
                raise RangeError(f"month index {s.month} out of range of the month axis.")
        order = sorted(range(len(samples)), key=lambda i: samples[i].month)
        rows = [samples[i] for i in order]
        lengths = np.array([len(s.features) for s in rows], dtype=np.int64)
        indptr = np.zeros(len(rows) + 1, dtype=np.int64)
        np.cumsum(lengths, out=indptr[1:])
        indices = (
            np.concatenate([s.features.indices for s in rows])
            if rows
            else np.zeros(0, dtype=np.int32)
        )
        return cls(
            dimension,
            months,
            indptr,
            indices,
            np.array([s.label for s in rows], dtype=np.int8),
            np.array([-1 if s.family is None else s.family for s in rows], dtype=np.int32),
            np.array([s.month for s in rows], dtype=np.int32),
            name=name,
        )

    @classmethod
    def empty(cls, dimension: int, months: Sequence[str] = (), name: str = ""):
        return cls(
            dimension,
            months,
            np.zeros(1, dtype=np.int64),
            np.zeros(0, dtype=np.int32),
            np.zeros(0, dtype=np.int8),
            np.zeros(0, dtype=np.int32),
            np.zeros(0, dtype=np.int32),
            name=name,
        )

    @classmethod
    def from_rows(
        cls,
        dimension: int,
        rows: Sequence[Tuple[str, int, int, Sequence[int]]],
        name: str = "",
        family_names: Sequence[str] = (),
    ):
        """
        Creates a Dataset from ``(month_label, label, family, indices)`` rows,
        ``family`` being -1 for none. The month axis is the sorted set of month
        labels found in the rows and indices are canonicalized.
        """
        labels_sorted = sorted({r[0] for r in rows}, key=month_ordinal)
        pos = {m: i for i, m in enumerate(labels_sorted)}
        samples = [
            Sample(
                FeatureVector.new(dimension, r[3]),
                int(r[1]),
                None if r[2] < 0 else int(r[2]),
                pos[r[0]],
            )
            for r in rows
        ]
        res = cls.new(dimension, labels_sorted, samples, name)
        res.family_names = tuple(family_names)
        return res

    @property
    def dimension(self) -> int:
        return self._dimension

    @property
    def months(self) -> Tuple[str, ...]:
        return self._months

    @property
    def indptr(self) -> np.ndarray:
        return self._indptr

    @property
    def indices(self) -> np.ndarray:
        return self._indices

    @property
    def labels(self) -> np.ndarray:
        return self._labels

    @property
    def families(self) -> np.ndarray:
        return self._families

    @property
    def month_index(self) -> np.ndarray:
        return self._month_index

    @property
    def samples(self) -> List[Sample]:
        return [self[i] for i in range(len(self))]

    def __len__(self) -> int:
        return int(self._labels.size)

    def __iter__(self) -> Iterator[Sample]:
        for i in range(len(self)):
            yield self[i]

    def __getitem__(self, i: int) -> Sample:
        if i < 0:
            i += len(self)
        if i < 0 or i >= len(self):
            raise RangeError(f"sample index {i} out of range.")
        fam = int(self._families[i])
        return Sample(
            self.features(i),
            int(self._labels[i]),
            None if fam < 0 else fam,
            int(self._month_index[i]),
        )

    def features(self, i: int) -> FeatureVector:
        return FeatureVector(
            self._dimension, self._indices[self._indptr[i] : self._indptr[i + 1]]
        )

    def keys(self) -> List[bytes]:
        """
        Returns the duplicate key (canonical index bytes) of every sample.
        """
        idx = self._indices.astype("<i8")
        p = self._indptr
        return [idx[p[i] : p[i + 1]].tobytes() for i in range(len(self))]

    def month_position(self, month: Union[str, int]) -> int:
        if isinstance(month, str):
            if month not in self._months:
                raise RangeError(f"Unknown month: {month}.")
            return self._months.index(month)
        if isinstance(month, (int, np.integer)) and 0 <= month < len(self._months):
            return int(month)
        raise RangeError(f"Unknown month: {month}.")

    def month_bounds(self, month: Union[str, int]) -> Tuple[int, int]:
        """
        Returns the ``[start, stop)`` sample positions of a month.
        """
        m = self.month_position(month)
        start = int(np.searchsorted(self._month_index, m, side="left"))
        stop = int(np.searchsorted(self._month_index, m, side="right"))
        return start, stop

    def month_counts(self) -> np.ndarray:
        return np.bincount(self._month_index, minlength=len(self._months))

    def month_slice(self, month: Union[str, int]) -> "Dataset":
        start, stop = self.month_bounds(month)
        return self.subset(np.arange(start, stop))

    def subset(
        self, positions: Sequence[int], months: Optional[Sequence[str]] = None
    ) -> "Dataset":
        """
        Returns a new Dataset holding the samples at ``positions`` in the given
        order. The month axis is kept unless ``months`` restricts it to a
        sub-range of labels covering the selected samples.
        """
        pos = np.asarray(positions, dtype=np.int64).reshape(-1)
        indptr, gather = _gather_rows(self._indptr, pos)
        month_index = self._month_index[pos]
        new_months = self._months
        if months is not None:
            new_months = tuple(months)
            remap = np.full(len(self._months), -1, dtype=np.int32)
            for j, label in enumerate(new_months):
                remap[self.month_position(label)] = j
            month_index = remap[month_index]
        return Dataset(
            self._dimension,
            new_months,
            indptr,
            self._indices[gather],
            self._labels[pos],
            self._families[pos],
            month_index,
            name=self.name,
            family_names=self.family_names,
        )

    @staticmethod
    def concat(datasets: Sequence["Dataset"], name: str = "") -> "Dataset":
        """
        Concatenates datasets sharing one dimension. Month tables are merged by
        label and samples are regrouped stably by month.
        """
        if not datasets:
            raise SpecificationError("datasets should not be empty.")
        dimension = datasets[0].dimension
        if any(d.dimension != dimension for d in datasets):
            raise SpecificationError("all datasets should share one dimension.")
        months = sorted({m for d in datasets for m in d.months}, key=month_ordinal)
        pos = {m: i for i, m in enumerate(months)}
        month_index = np.concatenate(
            [np.zeros(0, dtype=np.int32)]
            + [
                np.array([pos[m] for m in d.months], dtype=np.int32)[d.month_index]
                for d in datasets
                if len(d) > 0
            ]
        )
        offsets = np.cumsum([0] + [d.indices.size for d in datasets])
        indptr = np.concatenate(
            [np.zeros(1, dtype=np.int64)]
            + [d.indptr[1:] + offsets[k] for k, d in enumerate(datasets)]
        )
        indices = np.concatenate([d.indices for d in datasets])
        order = np.argsort(month_index, kind="stable")
        new_indptr, gather = _gather_rows(indptr, order)
        return Dataset(
            dimension,
            months,
            new_indptr,
            indices[gather],
            np.concatenate([d.labels for d in datasets])[order],
            np.concatenate([d.families for d in datasets])[order],
            month_index[order],
            name=name or datasets[0].name,
            family_names=datasets[0].family_names,
        )

    def to_csr(self) -> sp.csr_matrix:
        """
        Returns the feature matrix as a float64 CSR matrix of ones.
        """
        if self._csr is None:
            self._csr = sp.csr_matrix(
                (
                    np.ones(self._indices.size, dtype=np.float64),
                    self._indices,
                    self._indptr,
                ),
                shape=(len(self), self._dimension),
            )
        return self._csr

    def class_counts(self) -> Tuple[int, int]:
        """
        Returns ``(benign count, malware count)``.
        """
        n_malware = int(np.count_nonzero(self._labels == MALWARE))
        return len(self) - n_malware, n_malware

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Dataset):
            return NotImplemented
        return (
            self._dimension == other._dimension
            and self._months == other._months
            and np.array_equal(self._indptr, other._indptr)
            and np.array_equal(self._indices, other._indices)
            and np.array_equal(self._labels, other._labels)
            and np.array_equal(self._families, other._families)
            and np.array_equal(self._month_index, other._month_index)
        )

    def __repr__(self) -> str:
        return (
            f"Dataset(name={self.name!r}, dimension={self._dimension}, "
            f"months={len(self._months)}, samples={len(self)})"
        )


@dataclass
class DuplicateAnnotation:
    """
    Duplicate indicators of a sample sequence.

    ``intra[i]`` is the position of the earliest identical sample in the same
    scope (split or month) or -1 for a first occurrence. ``cross_split[i]`` and
    ``cross_index[i]`` point at an identical sample in an earlier split, or are
    both -1 for none.
    """

    intra: np.ndarray
    cross_split: np.ndarray
    cross_index: np.ndarray

    def __post_init__(self):
        self.intra = np.asarray(self.intra, dtype=np.int64).reshape(-1)
        self.cross_split = np.asarray(self.cross_split, dtype=np.int8).reshape(-1)
        self.cross_index = np.asarray(self.cross_index, dtype=np.int64).reshape(-1)
        n = self.intra.size
        if self.cross_split.size != n or self.cross_index.size != n:
            raise SpecificationError("annotation arrays should have the same length.")
        if n > 0:
            if np.any(self.intra >= np.arange(n)):
                raise SpecificationError("intra should reference only earlier positions.")
            if np.any(self.intra < -1):
                raise SpecificationError("intra should be -1 or a position.")
            if np.any((self.cross_split < 0) != (self.cross_index < 0)):
                raise SpecificationError("cross split and index should both be set or unset.")

    @classmethod
    def none(cls, n: int):
        return cls(
            np.full(n, -1, dtype=np.int64),
            np.full(n, -1, dtype=np.int8),
            np.full(n, -1, dtype=np.int64),
        )

    def __len__(self) -> int:
        return int(self.intra.size)

    def cross(self, i: int) -> Optional[Tuple[int, int]]:
        if self.cross_split[i] < 0:
            return None
        return int(self.cross_split[i]), int(self.cross_index[i])

    def root(self, i: int) -> int:
        """
        Follows intra links to the first occurrence.
        """
        while self.intra[i] >= 0:
            i = int(self.intra[i])
        return i

    def unique_mask(self) -> np.ndarray:
        return (self.intra < 0) & (self.cross_split < 0)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, DuplicateAnnotation):
            return NotImplemented
        return (
            np.array_equal(self.intra, other.intra)
            and np.array_equal(self.cross_split, other.cross_split)
            and np.array_equal(self.cross_index, other.cross_index)
        )


@dataclass
class SplitDataset:
    """
    Train, validation and test sections of a dataset defined by month ranges,
    with optional duplicate annotations (for the declared ``mode``) and
    provenance maps.

    ``provenance[split][i]`` is the position, in the section as originally
    split, of the i-th sample of that section.
    """

    train: Dataset
    validation: Dataset
    test: Dataset
    mode: Optional[str] = None
    annotations: Dict[str, DuplicateAnnotation] = field(default_factory=dict)
    provenance: Dict[str, np.ndarray] = field(default_factory=dict)

    def __post_init__(self):
        dims = {self.train.dimension, self.validation.dimension, self.test.dimension}
        if len(dims) != 1:
            raise SpecificationError("all splits should share one dimension.")
        for name in SPLIT_IDS:
            if name not in self.provenance:
                self.provenance[name] = np.arange(len(self.get(name)), dtype=np.int64)

    @property
    def dimension(self) -> int:
        return self.train.dimension

    def get(self, name: str) -> Dataset:
        if name not in SPLIT_IDS:
            raise SpecificationError(f"Unknown split: {name}.")
        return getattr(self, name)

    def items(self) -> List[Tuple[str, Dataset]]:
        return [(name, self.get(name)) for name in SPLIT_IDS]

    def concat(self) -> Dataset:
        return Dataset.concat([self.train, self.validation, self.test])


def _month_bound(r: MonthRange, what: str) -> Optional[Tuple[int, int]]:
    if r is None or len(r) == 0:
        return None
    if len(r) != 2:
        raise SpecificationError(f"{what} should be a (start, end) month pair.")
    lo, hi = month_ordinal(r[0]), month_ordinal(r[1])
    if hi < lo:
        raise SpecificationError(f"{what} should have start <= end.")
    return lo, hi


def temporal_split(
    dataset: Dataset,
    train_months: MonthRange,
    val_months: MonthRange,
    test_months: MonthRange,
) -> SplitDataset:
    """
    Splits a dataset into train, validation and test sections by inclusive
    month ranges. Each section keeps the original sample order and carries the
    month labels of its range that exist on the dataset's axis.

    Args:
        dataset (Dataset): The dataset to split.
        train_months (MonthRange): ``(first, last)`` training months.
        val_months (MonthRange): ``(first, last)`` validation months, or None
            for an empty validation section.
        test_months (MonthRange): ``(first, last)`` test months.
    Returns:
        SplitDataset: The three sections.
    Raises:
        SpecificationError: Overlapping, out-of-order or gapped ranges.
    """
    named = [
        ("train_months", _month_bound(train_months, "train_months")),
        ("val_months", _month_bound(val_months, "val_months")),
        ("test_months", _month_bound(test_months, "test_months")),
    ]
    present = [(what, b) for what, b in named if b is not None]
    for (wa, a), (wb, b) in zip(present, present[1:]):
        if b[0] <= a[1]:
            raise SpecificationError(
                f"{wb} should start after {wa} ends (ranges overlap or are out of order)."
            )
    ordinals = [month_ordinal(m) for m in dataset.months]
    sections: List[List[int]] = []
    for _, b in named:
        if b is None:
            sections.append([])
            continue
        sections.append([i for i, o in enumerate(ordinals) if b[0] <= o <= b[1]])
    used = [s for s in sections if s]
    for a, b in zip(used, used[1:]):
        if b[0] != a[-1] + 1:
            raise SpecificationError("month ranges should be contiguous on the month axis.")
    parts = []
    for months_idx in sections:
        if not months_idx:
            parts.append(Dataset.empty(dataset.dimension, (), name=dataset.name))
            continue
        start, _ = dataset.month_bounds(months_idx[0])
        _, stop = dataset.month_bounds(months_idx[-1])
        labels = [dataset.months[i] for i in months_idx]
        parts.append(dataset.subset(np.arange(start, stop), months=labels))
    return SplitDataset(parts[0], parts[1], parts[2])


def split_by_counts(dataset: Dataset, n_train: int, n_val: int, n_test: int) -> SplitDataset:
    """
    Splits the leading months of the axis into consecutive blocks of
    ``n_train``, ``n_val`` and ``n_test`` months.
    """
    if min(n_train, n_val, n_test) < 0:
        raise SpecificationError("month counts should be non-negative.")
    if n_train + n_val + n_test > len(dataset.months):
        raise SpecificationError("month counts exceed the month axis.")
    m = dataset.months

    def _r(a: int, b: int) -> MonthRange:
        return (m[a], m[b - 1]) if b > a else None

    return temporal_split(
        dataset,
        _r(0, n_train),
        _r(n_train, n_train + n_val),
        _r(n_train + n_val, n_train + n_val + n_test),
    )


def class_ratio(dataset: Dataset, month: Union[str, int]) -> float:
    """
    Returns the benign-to-malware ratio of a month, ``math.inf`` when the month
    has no malware.

    Raises:
        RangeError: Unknown month.
    """
    start, stop = dataset.month_bounds(month)
    labels = dataset.labels[start:stop]
    n_malware = int(np.count_nonzero(labels == MALWARE))
    n_benign = int(labels.size) - n_malware
    if n_malware == 0:
        return math.inf
    return n_benign / n_malware
