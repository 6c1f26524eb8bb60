from typing import Any, Dict, List

import numpy as np
from cbor2 import dumps, loads

from .exceptions import DecodeError, EncodeError, UnsupportedFormatError


class CBORProcessor:
    def _dumps(self, obj: Any) -> bytes:
        try:
            return dumps(obj, canonical=True)
        except Exception as err:
            raise EncodeError("Failed to encode.") from err

    def _loads(self, s: bytes) -> Any:
        try:
            return loads(s)
        except Exception as err:
            raise DecodeError("Failed to decode.") from err

    @staticmethod
    def _array_to_cbor(a: np.ndarray) -> List[Any]:
        if a.dtype == np.float64:
            return [list(a.shape), "f8", a.astype("<f8").tobytes()]
        if a.dtype.kind in ("i", "u", "b"):
            return [list(a.shape), "i8", a.astype("<i8").tobytes()]
        raise EncodeError(f"Unsupported array dtype: {a.dtype}.")

    @staticmethod
    def _array_from_cbor(v: Any) -> np.ndarray:
        if not isinstance(v, list) or len(v) != 3:
            raise DecodeError("Array entry should be [shape, dtype, bytes].")
        shape, dtype, raw = v
        if dtype not in ("f8", "i8") or not isinstance(raw, bytes):
            raise DecodeError(f"Unknown array dtype: {dtype}.")
        a = np.frombuffer(raw, dtype="<" + dtype)
        expected = int(np.prod(shape)) if shape else 1
        if a.size != expected:
            raise DecodeError("Array size does not match its shape.")
        return a.reshape(tuple(shape)).astype(np.float64 if dtype == "f8" else np.int64)

    def _arrays_to_cbor(self, arrays: List[np.ndarray]) -> List[Any]:
        return [self._array_to_cbor(np.asarray(a)) for a in arrays]

    def _arrays_from_cbor(self, entries: Any) -> List[np.ndarray]:
        if not isinstance(entries, list):
            raise DecodeError("Arrays should be list.")
        return [self._array_from_cbor(e) for e in entries]

    def _validate_header(self, doc: Any, fmt: str, version: int) -> Dict[str, Any]:
        if not isinstance(doc, dict):
            raise DecodeError("Checkpoint should be map.")
        if doc.get("format") != fmt:
            raise UnsupportedFormatError(f"Unknown checkpoint format: {doc.get('format')}.")
        if doc.get("version") != version:
            raise UnsupportedFormatError(f"Unsupported checkpoint version: {doc.get('version')}.")
        return doc
