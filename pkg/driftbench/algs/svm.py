import logging
from typing import Any, Dict

import numpy as np
import scipy.sparse as sp

from ..const import SVM_MAX_EPOCHS, SVM_TOLERANCE
from ..dataset import Dataset
from ..exceptions import DecodeError
from ..model_interface import ModelInterface, class_weights
from ..utils import sigmoid

logger = logging.getLogger(__name__)


class LinearSVM(ModelInterface):
    """
    Linear L2-regularized hinge-loss SVM solved by dual coordinate descent.

    Coordinates are visited in a fixed order and the bias is an extra
    constant feature, so fitting does not depend on the seed. The malware
    probability is the sigmoid of the decision value.
    """

    def __init__(self, spec):
        super().__init__(spec)
        self._w = np.zeros(0)
        self._b = 0.0

    def fit(self, data: Dataset, seed: int = 0) -> "LinearSVM":
        self._start_fit(data, seed)
        y = np.where(data.labels == 1, 1.0, -1.0)
        upper = self._spec["C"] * class_weights(data.labels, self._spec["class_weight"])
        rows = [data.indices[data.indptr[i] : data.indptr[i + 1]] for i in range(len(data))]
        # Squared norm of the augmented row (binary features plus the bias one).
        q = np.array([r.size + 1.0 for r in rows])
        alpha = np.zeros(len(data))
        w = np.zeros(data.dimension)
        b = 0.0
        epoch = 0
        for epoch in range(1, SVM_MAX_EPOCHS + 1):
            max_pg = 0.0
            for i, idx in enumerate(rows):
                g = y[i] * (w[idx].sum() + b) - 1.0
                a = alpha[i]
                if a == 0.0:
                    pg = min(g, 0.0)
                elif a == upper[i]:
                    pg = max(g, 0.0)
                else:
                    pg = g
                if pg == 0.0:
                    continue
                max_pg = max(max_pg, abs(pg))
                a_new = min(max(a - g / q[i], 0.0), upper[i])
                delta = (a_new - a) * y[i]
                if delta != 0.0:
                    w[idx] += delta
                    b += delta
                    alpha[i] = a_new
            if max_pg < SVM_TOLERANCE:
                break
        else:
            logger.warning("SVM: dual coordinate descent stopped at %d epochs.", SVM_MAX_EPOCHS)
        self._w = w
        self._b = b
        self.metadata["epochs_run"] = epoch
        self.metadata["class_weight"] = self._spec["class_weight"]
        return self

    def decision_function(self, features) -> np.ndarray:
        return self._decision(self._as_matrix(features))

    def _decision(self, x: sp.csr_matrix) -> np.ndarray:
        return np.asarray(x @ self._w).reshape(-1) + self._b

    def _predict_proba(self, x: sp.csr_matrix) -> np.ndarray:
        return sigmoid(self._decision(x))

    def _state_to_cbor(self) -> Dict[str, Any]:
        return {"w": self._array_to_cbor(self._w), "b": float(self._b)}

    def _state_from_cbor(self, state: Any) -> None:
        if not isinstance(state, dict) or "w" not in state:
            raise DecodeError("SVM state should hold w and b.")
        self._w = self._array_from_cbor(state["w"])
        self._b = float(state.get("b", 0.0))
