from typing import List, Sequence

import numpy as np

from ..cbor_processor import CBORProcessor

PARAMS_FORMAT = "driftbench-params"
PARAMS_VERSION = 1


class ParamsBlob(CBORProcessor):
    """
    Versioned binary blob of network parameters: a CBOR map holding one
    ``[shape, dtype, raw little-endian bytes]`` entry per array.
    """

    def encode(self, params: Sequence[np.ndarray]) -> bytes:
        return self._dumps(
            {
                "format": PARAMS_FORMAT,
                "version": PARAMS_VERSION,
                "arrays": self._arrays_to_cbor(list(params)),
            }
        )

    def decode(self, data: bytes) -> List[np.ndarray]:
        doc = self._validate_header(self._loads(data), PARAMS_FORMAT, PARAMS_VERSION)
        return self._arrays_from_cbor(doc.get("arrays"))


def params_to_blob(params: Sequence[np.ndarray]) -> bytes:
    return ParamsBlob().encode(params)


def params_from_blob(data: bytes) -> List[np.ndarray]:
    """
    Decodes a blob written by :func:`params_to_blob`.

    Raises:
        UnsupportedFormatError: Unknown format tag or version.
        DecodeError: Failed to decode the blob.
    """
    return ParamsBlob().decode(data)
