"""
Binary dataset container.

Layout (all integers little-endian)::

    magic        4 bytes  b"SMD1"
    version      u32      1
    dimension    u32
    month-count  u32
    sample-count u64
    months       month-count x (u32 length, UTF-8 label)
    indptr       (sample-count + 1) x u64
    indices      indptr[-1] x u32
    labels       sample-count x u8
    families     sample-count x i32 (-1 = none)
    month index  sample-count x u16
    annotation   u8 flag, then if set:
                 sample-count x i64 intra,
                 sample-count x (i8 split, i64 index) cross links
"""
import os
import struct
from typing import Optional, Tuple, Union

import numpy as np

from .const import CONTAINER_MAGIC, CONTAINER_VERSION
from .dataset import Dataset, DuplicateAnnotation
from .exceptions import (
    CorruptionError,
    EncodeError,
    SpecificationError,
    UnsupportedFormatError,
)

_HEADER = struct.Struct("<IIIQ")
_U32 = struct.Struct("<I")
_CROSS_DTYPE = np.dtype([("split", "i1"), ("index", "<i8")])


def encode_container(
    dataset: Dataset, annotation: Optional[DuplicateAnnotation] = None
) -> bytes:
    """
    Encodes a dataset (and optionally its duplicate annotation) into the
    container byte layout. The output depends only on the field values.

    Args:
        dataset (Dataset): A canonical dataset.
        annotation (Optional[DuplicateAnnotation]): Duplicate indicators
            aligned with the samples of ``dataset``.
    Returns:
        bytes: The encoded container.
    Raises:
        EncodeError: Failed to encode.
    """
    n = len(dataset)
    if annotation is not None and len(annotation) != n:
        raise EncodeError("annotation should have one entry per sample.")
    if len(dataset.months) > 0xFFFF:
        raise EncodeError("month-count should fit in u16 month indices.")
    chunks = [
        CONTAINER_MAGIC,
        _HEADER.pack(CONTAINER_VERSION, dataset.dimension, len(dataset.months), n),
    ]
    for m in dataset.months:
        raw = m.encode("utf-8")
        chunks.append(_U32.pack(len(raw)))
        chunks.append(raw)
    chunks.append(dataset.indptr.astype("<u8").tobytes())
    chunks.append(dataset.indices.astype("<u4").tobytes())
    chunks.append(dataset.labels.astype("u1").tobytes())
    chunks.append(dataset.families.astype("<i4").tobytes())
    chunks.append(dataset.month_index.astype("<u2").tobytes())
    if annotation is None:
        chunks.append(b"\x00")
    else:
        chunks.append(b"\x01")
        chunks.append(annotation.intra.astype("<i8").tobytes())
        cross = np.empty(n, dtype=_CROSS_DTYPE)
        cross["split"] = annotation.cross_split
        cross["index"] = annotation.cross_index
        chunks.append(cross.tobytes())
    return b"".join(chunks)


class _Cursor:
    def __init__(self, data: bytes):
        self._data = memoryview(data)
        self._pos = 0

    def take(self, size: int) -> memoryview:
        if size < 0 or self._pos + size > len(self._data):
            raise CorruptionError("Container is truncated.")
        res = self._data[self._pos : self._pos + size]
        self._pos += size
        return res

    def array(self, dtype: Union[str, np.dtype], count: int) -> np.ndarray:
        dt = np.dtype(dtype)
        return np.frombuffer(self.take(dt.itemsize * count), dtype=dt, count=count)

    @property
    def exhausted(self) -> bool:
        return self._pos == len(self._data)


def decode_container(data: bytes) -> Tuple[Dataset, Optional[DuplicateAnnotation]]:
    """
    Decodes container bytes.

    Args:
        data (bytes): The encoded container.
    Returns:
        Tuple[Dataset, Optional[DuplicateAnnotation]]: The dataset and its
        duplicate annotation (None when the file carries none).
    Raises:
        UnsupportedFormatError: Unknown magic bytes or version.
        CorruptionError: Truncated or inconsistent data.
    """
    cur = _Cursor(data)
    if len(data) < len(CONTAINER_MAGIC) or bytes(cur.take(4)) != CONTAINER_MAGIC:
        raise UnsupportedFormatError("Unknown container magic.")
    version, dimension, n_months, n = _HEADER.unpack(cur.take(_HEADER.size))
    if version != CONTAINER_VERSION:
        raise UnsupportedFormatError(f"Unsupported container version: {version}.")
    months = []
    for _ in range(n_months):
        (size,) = _U32.unpack(cur.take(_U32.size))
        try:
            months.append(bytes(cur.take(size)).decode("utf-8"))
        except UnicodeDecodeError as err:
            raise CorruptionError("Month label is not UTF-8.") from err
    indptr = cur.array("<u8", n + 1)
    nnz = int(indptr[-1])
    indices = cur.array("<u4", nnz)
    labels = cur.array("u1", n)
    families = cur.array("<i4", n)
    month_index = cur.array("<u2", n)
    flag = bytes(cur.take(1))
    annotation = None
    if flag == b"\x01":
        intra = cur.array("<i8", n)
        cross = cur.array(_CROSS_DTYPE, n)
    elif flag != b"\x00":
        raise CorruptionError("Unknown annotation flag.")
    if not cur.exhausted:
        raise CorruptionError("Container has trailing bytes.")
    try:
        dataset = Dataset(
            dimension,
            months,
            indptr.astype(np.int64),
            indices.astype(np.int64),
            labels,
            families,
            month_index,
        )
        if flag == b"\x01":
            annotation = DuplicateAnnotation(intra, cross["split"], cross["index"])
    except SpecificationError as err:
        raise CorruptionError(f"Container is inconsistent: {err}") from err
    return dataset, annotation


def save_container(
    dataset: Dataset,
    path: Union[str, os.PathLike],
    annotation: Optional[DuplicateAnnotation] = None,
) -> None:
    """
    Writes a dataset (and optionally its duplicate annotation) to ``path``.
    Two saves of equal inputs produce identical files.
    """
    with open(path, "wb") as f:
        f.write(encode_container(dataset, annotation))


def load_container(
    path: Union[str, os.PathLike]
) -> Tuple[Dataset, Optional[DuplicateAnnotation]]:
    """
    Reads a container written by :func:`save_container`.

    Raises:
        UnsupportedFormatError: Unknown magic bytes or version.
        CorruptionError: Truncated or inconsistent file.
    """
    with open(path, "rb") as f:
        data = f.read()
    dataset, annotation = decode_container(data)
    dataset.name = os.path.splitext(os.path.basename(os.fspath(path)))[0]
    return dataset, annotation
