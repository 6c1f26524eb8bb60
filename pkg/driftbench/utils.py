import json
import re
from typing import Any, Tuple

import numpy as np
from cryptography.hazmat.primitives import hashes

from .exceptions import FormatError, NumericError

_MONTH_PATTERN = re.compile(r"^(\d{4})-(\d{2})$")


def parse_month(label: str) -> Tuple[int, int]:
    """
    Parses a calendar-month label formatted as ``YYYY-MM``.
    """
    if not isinstance(label, str):
        raise FormatError(f"Unknown month format: {label!r}.")
    m = _MONTH_PATTERN.match(label.strip())
    if not m:
        raise FormatError(f"Unknown month format: {label}.")
    year, month = int(m.group(1)), int(m.group(2))
    if month < 1 or month > 12:
        raise FormatError(f"Unknown month format: {label}.")
    return year, month


def month_ordinal(label: str) -> int:
    year, month = parse_month(label)
    return year * 12 + month - 1


def month_label(ordinal: int) -> str:
    return f"{ordinal // 12:04d}-{ordinal % 12 + 1:02d}"


def month_range(start: str, count: int) -> list:
    """
    Returns ``count`` consecutive month labels starting at ``start``.
    """
    first = month_ordinal(start)
    return [month_label(first + i) for i in range(count)]


def sha256(data: bytes) -> bytes:
    h = hashes.Hash(hashes.SHA256())
    h.update(data)
    return h.finalize()


def sha256_hex(data: bytes) -> str:
    return sha256(data).hex()


def canonical_json(obj: Any) -> bytes:
    return json.dumps(obj, sort_keys=True, separators=(",", ":")).encode("utf-8")


def derive_seed(seed: int, key: str) -> int:
    """
    Derives an independent 64-bit seed from a parent seed and a key string.
    The first 8 bytes (little-endian) of SHA-256(seed as u64 LE || key) are used.
    """
    if seed < 0 or seed >= 2 ** 64:
        raise ValueError("seed should be u64.")
    digest = sha256(int(seed).to_bytes(8, "little") + key.encode("utf-8"))
    return int.from_bytes(digest[0:8], "little")


def sigmoid(z: np.ndarray) -> np.ndarray:
    z = np.asarray(z, dtype=np.float64)
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def logit(p: float) -> float:
    return float(np.log(p) - np.log1p(-p))


def check_finite(values: np.ndarray, what: str = "values") -> np.ndarray:
    if not np.all(np.isfinite(values)):
        raise NumericError(f"{what} should be finite.")
    return values
