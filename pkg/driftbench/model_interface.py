import copy
from typing import Any, Dict, Optional, Sequence, Union

import numpy as np
import scipy.sparse as sp

from .cbor_processor import CBORProcessor
from .const import CHECKPOINT_FORMAT, CHECKPOINT_VERSION, DECISION_THRESHOLD, MALWARE
from .dataset import Dataset, FeatureVector
from .exceptions import SpecificationError, TrainingError, UnsupportedOperationError, UsageError
from .model_spec import ModelSpec

FeatureInput = Union[Dataset, sp.spmatrix, np.ndarray, Sequence[FeatureVector]]


class ModelInterface(CBORProcessor):
    """
    The interface class for a malware classifier: fitting, malware
    probability, uncertainty, and (kind dependent) fine-tuning, embeddings and
    feature importance.
    """

    def __init__(self, spec: ModelSpec):
        """
        Constructor.

        Args:
            spec (ModelSpec): A validated model spec.
        """
        if not isinstance(spec, ModelSpec):
            raise SpecificationError("spec should be ModelSpec.")
        self._spec = spec
        self._dimension: Optional[int] = None
        self.metadata: Dict[str, Any] = {}
        # Worker processes for kinds that grow independent parts (RF trees).
        self.jobs = 1
        return

    @property
    def kind(self) -> str:
        """
        The model kind.
        """
        return self._spec.kind

    @property
    def spec(self) -> ModelSpec:
        return self._spec

    @property
    def dimension(self) -> Optional[int]:
        """
        The feature dimension seen at fit time (None before fitting).
        """
        return self._dimension

    @property
    def fitted(self) -> bool:
        return self._dimension is not None

    def fit(self, data: Dataset, seed: int = 0) -> "ModelInterface":
        """
        Fits the model from scratch.

        Args:
            data (Dataset): Labeled training samples.
            seed (int): The run seed.
        Returns:
            ModelInterface: ``self``.
        Raises:
            TrainingError: Unusable training data (such as a single class).
            SpecificationError: Invalid arguments.
        """
        raise NotImplementedError

    def predict_proba(self, features: FeatureInput) -> np.ndarray:
        """
        Returns the malware probability of every row, in ``[0, 1]``.

        Raises:
            SpecificationError: Dimension mismatch.
            UsageError: The model is not fitted.
        """
        return self._predict_proba(self._as_matrix(features))

    def predict(self, features: FeatureInput) -> np.ndarray:
        """
        Returns labels thresholded at ``p > 0.5``.
        """
        return (self.predict_proba(features) > DECISION_THRESHOLD).astype(np.int8)

    def uncertainty(self, features: FeatureInput) -> np.ndarray:
        """
        Returns ``1 - max(p, 1 - p)`` for every row (0.5 is maximal).
        """
        p = self.predict_proba(features)
        return 1.0 - np.maximum(p, 1.0 - p)

    def fine_tune(self, pool: Dataset, seed: int = 0, spec: Optional[ModelSpec] = None, epochs: Optional[int] = None) -> "ModelInterface":
        """
        Continues training from the current weights and returns the tuned
        copy; the receiver is left unchanged.

        Raises:
            UnsupportedOperationError: The kind retrains from scratch.
        """
        raise UnsupportedOperationError(f"{self.kind} does not support fine-tuning.")

    def embed(self, features: FeatureInput) -> np.ndarray:
        """
        Returns the encoder embeddings of the rows.

        Raises:
            UnsupportedOperationError: The kind has no encoder.
        """
        raise UnsupportedOperationError(f"{self.kind} has no embedding.")

    def feature_importance(self) -> np.ndarray:
        """
        Returns the total split gain per feature normalized to sum 1.

        Raises:
            UnsupportedOperationError: The kind is not tree based.
        """
        raise UnsupportedOperationError(f"{self.kind} has no feature importance.")

    def copy(self) -> "ModelInterface":
        return copy.deepcopy(self)

    def to_bytes(self) -> bytes:
        """
        Serializes the fitted model into a CBOR checkpoint.

        Raises:
            UsageError: The model is not fitted.
            EncodeError: Failed to encode.
        """
        self._check_fitted()
        return self._dumps(
            {
                "format": CHECKPOINT_FORMAT,
                "version": CHECKPOINT_VERSION,
                "kind": self.kind,
                "params": self._spec.params,
                "dimension": self._dimension,
                "metadata": self.metadata,
                "state": self._state_to_cbor(),
            }
        )

    def _load(self, doc: Dict[str, Any]) -> None:
        dim = doc.get("dimension")
        if not isinstance(dim, int) or dim <= 0:
            raise SpecificationError("dimension should be positive int.")
        self._dimension = dim
        self.metadata = dict(doc.get("metadata") or {})
        self._state_from_cbor(doc.get("state"))

    def _state_to_cbor(self) -> Dict[str, Any]:
        raise NotImplementedError

    def _state_from_cbor(self, state: Any) -> None:
        raise NotImplementedError

    def _predict_proba(self, x: sp.csr_matrix) -> np.ndarray:
        raise NotImplementedError

    def _check_fitted(self) -> None:
        if self._dimension is None:
            raise UsageError(f"{self.kind} model is not fitted.")

    def _as_matrix(self, features: FeatureInput) -> sp.csr_matrix:
        self._check_fitted()
        if isinstance(features, Dataset):
            x = features.to_csr()
        elif sp.issparse(features):
            x = sp.csr_matrix(features, dtype=np.float64)
        elif isinstance(features, np.ndarray):
            x = sp.csr_matrix(np.atleast_2d(features).astype(np.float64))
        else:
            vectors = list(features)
            dims = {v.dimension for v in vectors}
            if dims and dims != {self._dimension}:
                raise SpecificationError(f"feature dimension should be {self._dimension}.")
            indptr = np.cumsum([0] + [len(v) for v in vectors])
            indices = np.concatenate([v.indices for v in vectors]) if vectors else np.zeros(0, dtype=np.int64)
            x = sp.csr_matrix(
                (np.ones(indices.size), indices, indptr), shape=(len(vectors), self._dimension)
            )
        if x.shape[1] != self._dimension:
            raise SpecificationError(f"feature dimension should be {self._dimension}, got {x.shape[1]}.")
        return x

    def _start_fit(self, data: Dataset, seed: int, require_both: bool = True) -> None:
        if not isinstance(data, Dataset):
            raise SpecificationError("data should be Dataset.")
        if len(data) == 0:
            raise TrainingError(f"{self.kind} needs at least one training sample.")
        n_benign, n_malware = data.class_counts()
        if require_both and (n_benign == 0 or n_malware == 0):
            raise TrainingError(f"{self.kind} needs samples of both classes.")
        self._dimension = data.dimension
        self.metadata = {
            "seed": int(seed),
            "n_train": len(data),
            "n_malware": n_malware,
            "epochs_run": 0,
        }


def class_weights(labels: np.ndarray, setting: Optional[str]) -> np.ndarray:
    """
    Per-sample weights: ones, or inverse class frequency for ``"balanced"``.
    """
    y = np.asarray(labels)
    if setting is None:
        return np.ones(y.size, dtype=np.float64)
    n_malware = int(np.count_nonzero(y == MALWARE))
    counts = np.array([y.size - n_malware, n_malware], dtype=np.float64)
    per_class = np.where(counts > 0, y.size / (2.0 * np.maximum(counts, 1.0)), 0.0)
    return per_class[y.astype(np.int64)]
