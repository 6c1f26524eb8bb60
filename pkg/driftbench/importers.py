import csv
import json
import logging
import os
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import scipy.sparse as sp

from .const import BENIGN, MALWARE
from .dataset import Dataset
from .exceptions import FormatError, ParseError, RangeError, SpecificationError
from .utils import parse_month

logger = logging.getLogger(__name__)

CSV_HEADER = ["month", "label", "family", "features"]

Row = Tuple[str, int, Optional[str], List[int]]


class _FamilyTable:
    """
    Maps family strings to integer ids. Decimal strings keep their value when
    every family in the file is decimal; otherwise ids follow first appearance.
    """

    def __init__(self, names: Sequence[str]):
        seen: Dict[str, int] = {}
        for name in names:
            if name not in seen:
                seen[name] = len(seen)
        self.numeric = all(n.isdecimal() for n in seen)
        self._ids = {n: int(n) for n in seen} if self.numeric else seen
        self.names: Tuple[str, ...] = () if self.numeric else tuple(seen)

    def id_of(self, name: Optional[str]) -> int:
        return -1 if name is None else self._ids[name]


def _check_month(value: Any, line_no: int) -> str:
    if not isinstance(value, str):
        raise FormatError(f"line {line_no}: Unknown month format: {value!r}.")
    try:
        parse_month(value)
    except FormatError as err:
        raise FormatError(f"line {line_no}: {err}") from err
    return value.strip()


def _check_label(value: Any, line_no: int) -> int:
    if isinstance(value, str):
        value = value.strip()
        if value not in ("0", "1"):
            raise ParseError(f"label should be 0 or 1: {value!r}.", line_no)
        return int(value)
    if isinstance(value, bool) or value not in (BENIGN, MALWARE):
        raise ParseError(f"label should be 0 or 1: {value!r}.", line_no)
    return int(value)


def _check_family(value: Any, label: int, line_no: int) -> Optional[str]:
    if value is None or value == "":
        return None
    if isinstance(value, bool) or not isinstance(value, (str, int)):
        raise ParseError("family should be str or null.", line_no)
    if label != MALWARE:
        raise ParseError("family should be empty for benign samples.", line_no)
    return str(value)


def _check_indices(values: Sequence[Any], dimension: Optional[int], line_no: int) -> List[int]:
    res = []
    for v in values:
        if isinstance(v, bool) or not isinstance(v, int) or v < 0:
            raise ParseError(f"feature index should be non-negative int: {v!r}.", line_no)
        if dimension is not None and v >= dimension:
            raise RangeError(f"line {line_no}: index {v} out of range [0, {dimension}).")
        res.append(v)
    return res


def _read_csv(path: str, dimension: Optional[int]) -> List[Row]:
    rows: List[Row] = []
    with open(path, newline="", encoding="utf-8") as f:
        reader = csv.reader(f)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != CSV_HEADER:
            raise ParseError("header should be month,label,family,features.", 1)
        for fields in reader:
            line_no = reader.line_num
            if not fields:
                continue
            if len(fields) != 4:
                raise ParseError(f"expected 4 fields, got {len(fields)}.", line_no)
            month = _check_month(fields[0], line_no)
            label = _check_label(fields[1], line_no)
            family = _check_family(fields[2].strip(), label, line_no)
            try:
                raw = [int(t) for t in fields[3].split()]
            except ValueError as err:
                raise ParseError("features should be decimal indices.", line_no) from err
            rows.append((month, label, family, _check_indices(raw, dimension, line_no)))
    return rows


def _read_jsonl(path: str, dimension: Optional[int]) -> List[Row]:
    rows: List[Row] = []
    with open(path, encoding="utf-8") as f:
        for line_no, line in enumerate(f, start=1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
            except ValueError as err:
                raise ParseError("invalid JSON.", line_no) from err
            if not isinstance(rec, dict):
                raise ParseError("record should be object.", line_no)
            missing = [k for k in ("month", "label", "features") if k not in rec]
            if missing:
                raise ParseError(f"{missing[0]} not found.", line_no)
            unknown = sorted(set(rec) - set(CSV_HEADER))
            if unknown:
                raise ParseError(f"Unknown field: {unknown[0]}.", line_no)
            if not isinstance(rec["features"], list):
                raise ParseError("features should be list.", line_no)
            month = _check_month(rec["month"], line_no)
            label = _check_label(rec["label"], line_no)
            family = _check_family(rec.get("family"), label, line_no)
            rows.append((month, label, family, _check_indices(rec["features"], dimension, line_no)))
    return rows


def _detect_schema(path: str) -> str:
    ext = os.path.splitext(path)[1].lower()
    if ext == ".csv":
        return "csv"
    if ext in (".jsonl", ".ndjson", ".json"):
        return "jsonl"
    raise SpecificationError(f"Cannot detect schema of {path}; use csv or jsonl.")


def _to_dataset(rows: List[Row], dimension: Optional[int], name: str) -> Dataset:
    if dimension is None:
        dimension = 1 + max((max(r[3]) for r in rows if r[3]), default=0)
    families = _FamilyTable([r[2] for r in rows if r[2] is not None])
    return Dataset.from_rows(
        dimension,
        [(m, label, families.id_of(fam), idx) for m, label, fam, idx in rows],
        name=name,
        family_names=families.names,
    )


def import_text(
    path: Union[str, os.PathLike],
    dimension: Optional[int] = None,
    schema: Optional[str] = None,
) -> Dataset:
    """
    Imports a line-oriented text dataset.

    CSV files have the header ``month,label,family,features`` with features
    as space-separated decimal indices in double quotes and an empty family
    for benign samples. JSON-lines records look like
    ``{"month": "2019-01", "label": 1, "family": "famA", "features": [3, 7, 2]}``.

    Args:
        path (Union[str, os.PathLike]): The input file.
        dimension (Optional[int]): The feature dimension n. Inferred as the
            largest index + 1 when omitted.
        schema (Optional[str]): ``"csv"`` or ``"jsonl"``; detected from the
            file extension when omitted.
    Returns:
        Dataset: A canonical dataset (months sorted, samples regrouped by
        month, indices sorted).
    Raises:
        ParseError: A malformed line (the message carries the line number).
        RangeError: A feature index >= dimension.
        FormatError: A month not formatted as ``YYYY-MM``.
    """
    p = os.fspath(path)
    if dimension is not None and (not isinstance(dimension, int) or dimension <= 0):
        raise SpecificationError("dimension should be positive int.")
    schema = schema or _detect_schema(p)
    if schema == "csv":
        rows = _read_csv(p, dimension)
    elif schema == "jsonl":
        rows = _read_jsonl(p, dimension)
    else:
        raise SpecificationError(f"Unknown schema: {schema}.")
    name = os.path.splitext(os.path.basename(p))[0]
    logger.info("Imported %d records from %s.", len(rows), p)
    return _to_dataset(rows, dimension, name)


def import_packed_arrays(
    path: Union[str, os.PathLike], dimension: Optional[int] = None
) -> Dataset:
    """
    Best-effort reader for a packed-array release stored as ``.npz``.

    The archive holds ``y`` (labels), ``month`` (labels starting with
    ``YYYY-MM``), an optional ``family`` array (empty strings or negative ints
    for none) and the feature matrix either as a dense ``X`` or as CSR parts
    ``X_data``, ``X_indices``, ``X_indptr`` and ``X_shape``. Non-zero values
    count as active features.
    """
    p = os.fspath(path)
    with np.load(p, allow_pickle=False) as npz:
        keys = set(npz.files)
        if "X" in keys:
            x = sp.csr_matrix(npz["X"])
        elif {"X_data", "X_indices", "X_indptr", "X_shape"} <= keys:
            x = sp.csr_matrix(
                (npz["X_data"], npz["X_indices"], npz["X_indptr"]),
                shape=tuple(npz["X_shape"]),
            )
        else:
            raise FormatError("Packed arrays should hold X or X_data/X_indices/X_indptr/X_shape.")
        for k in ("y", "month"):
            if k not in keys:
                raise FormatError(f"{k} not found in packed arrays.")
        y = np.asarray(npz["y"]).astype(np.int64)
        months = [str(m)[:7] for m in npz["month"]]
        fams: List[Optional[str]] = [None] * len(y)
        if "family" in keys:
            for i, f in enumerate(npz["family"]):
                s = str(f).strip()
                if y[i] == MALWARE and s not in ("", "-1", "None", "nan"):
                    fams[i] = s
    if x.shape[0] != len(y) or len(months) != len(y):
        raise FormatError("X, y and month should have the same number of rows.")
    x.eliminate_zeros()
    x.sort_indices()
    rows: List[Row] = []
    for i in range(len(y)):
        month = _check_month(months[i], i + 1)
        label = _check_label(int(y[i]), i + 1)
        idx = x.indices[x.indptr[i] : x.indptr[i + 1]].tolist()
        rows.append((month, label, fams[i], _check_indices(idx, dimension, i + 1)))
    if dimension is None:
        dimension = int(x.shape[1])
    logger.info("Imported %d packed rows from %s.", len(rows), p)
    return _to_dataset(rows, dimension, os.path.splitext(os.path.basename(p))[0])
