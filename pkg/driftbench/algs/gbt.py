import logging
from typing import Any, Dict

import numpy as np
import scipy.sparse as sp

from ..const import GBT_MIN_CHILD_WEIGHT, MALWARE
from ..dataset import Dataset
from ..exceptions import DecodeError
from ..model_interface import ModelInterface
from ..utils import logit, sigmoid
from .tree import NewtonScorer, grow_tree, normalized_importance, trees_from_cbor, trees_to_cbor

logger = logging.getLogger(__name__)


class GradientBoostedTrees(ModelInterface):
    """
    Second-order gradient boosting on the logistic loss with exact greedy
    splits. Leaf weights are ``-T(G) / (H + lambda)`` where ``T`` soft
    thresholds by ``alpha``; every tree is shrunk by ``eta``. The base score
    is the logit of the training malware prevalence. Fitting is
    deterministic.
    """

    def __init__(self, spec):
        super().__init__(spec)
        self._trees = []
        self._base_score = 0.0
        self._eta = float(spec["eta"])

    @property
    def trees(self):
        return list(self._trees)

    @property
    def base_score(self) -> float:
        return self._base_score

    def fit(self, data: Dataset, seed: int = 0) -> "GradientBoostedTrees":
        self._start_fit(data, seed)
        x = data.to_csr()
        y = data.labels.astype(np.float64)
        n_benign, n_malware = data.class_counts()
        scale = np.ones(len(data))
        if self._spec["balance"]:
            scale[data.labels == MALWARE] = n_benign / n_malware
        rows = np.arange(len(data))
        self._base_score = logit(n_malware / len(data))
        self._eta = float(self._spec["eta"])
        margin = np.full(len(data), self._base_score)
        trees = []
        for r in range(self._spec["num_boost_round"]):
            p = sigmoid(margin)
            g = (p - y) * scale
            h = p * (1.0 - p) * scale
            scorer = NewtonScorer(
                y, g, h, self._spec["alpha"], self._spec["lambda"], GBT_MIN_CHILD_WEIGHT
            )
            tree = grow_tree(x, rows, scorer, self._spec["max_depth"])
            trees.append(tree)
            margin += self._eta * tree.predict(x)
        self._trees = trees
        self.metadata["rounds"] = len(trees)
        self.metadata["balance"] = bool(self._spec["balance"])
        logger.debug("GBT: fitted %d rounds.", len(trees))
        return self

    def margin(self, features) -> np.ndarray:
        """
        Returns the summed logit of every row.
        """
        return self._margin(self._as_matrix(features))

    def _margin(self, x: sp.csr_matrix) -> np.ndarray:
        out = np.full(x.shape[0], self._base_score)
        for t in self._trees:
            out += self._eta * t.predict(x)
        return out

    def _predict_proba(self, x: sp.csr_matrix) -> np.ndarray:
        return sigmoid(self._margin(x))

    def feature_importance(self) -> np.ndarray:
        self._check_fitted()
        return normalized_importance(self._trees, self._dimension)

    def _state_to_cbor(self) -> Dict[str, Any]:
        return {
            "trees": trees_to_cbor(self._trees),
            "base_score": float(self._base_score),
            "eta": self._eta,
        }

    def _state_from_cbor(self, state: Any) -> None:
        if not isinstance(state, dict) or "base_score" not in state:
            raise DecodeError("GBT state should hold trees and base_score.")
        self._trees = trees_from_cbor(state.get("trees"))
        self._base_score = float(state["base_score"])
        self._eta = float(state.get("eta", self._spec["eta"]))
