import logging
import math
from typing import Any, Dict

import numpy as np
import scipy.sparse as sp
from joblib import Parallel, delayed

from ..dataset import Dataset
from ..model_interface import ModelInterface, class_weights
from ..numerics.rng import RngStream
from .tree import ImpurityScorer, grow_tree, normalized_importance, trees_from_cbor, trees_to_cbor

logger = logging.getLogger(__name__)


def _grow(x, y, weights, max_depth, max_features, criterion, tree_rng: RngStream):
    n = y.size
    counts = np.bincount(tree_rng.integers(0, n, n), minlength=n)
    rows = np.flatnonzero(counts > 0)
    scorer = ImpurityScorer(y, counts * weights, criterion)
    return grow_tree(x, rows, scorer, max_depth, max_features, tree_rng)


class RandomForest(ModelInterface):
    """
    Bagged classification trees. Every tree is grown on a full-size bootstrap
    sample with ``sqrt(n)`` candidate features per node; the malware
    probability is the mean of the per-tree leaf malware frequencies. Trees
    draw from their own streams, so ``jobs`` workers grow the same forest.
    """

    def __init__(self, spec):
        super().__init__(spec)
        self._trees = []

    @property
    def trees(self):
        return list(self._trees)

    def fit(self, data: Dataset, seed: int = 0) -> "RandomForest":
        self._start_fit(data, seed, require_both=False)
        x = data.to_csr()
        y = data.labels.astype(np.int64)
        weights = class_weights(y, self._spec["class_weight"])
        max_features = max(1, int(math.sqrt(data.dimension)))
        rng = RngStream(seed).child("RF")
        args = (x, y, weights, self._spec["max_depth"], max_features, self._spec["criterion"])
        streams = [rng.child(f"tree-{t}") for t in range(self._spec["n_estimators"])]
        if self.jobs == 1:
            trees = [_grow(*args, s) for s in streams]
        else:
            trees = Parallel(n_jobs=self.jobs)(delayed(_grow)(*args, s) for s in streams)
        self._trees = list(trees)
        self.metadata["class_weight"] = self._spec["class_weight"]
        logger.debug("RF: grew %d trees.", len(trees))
        return self

    def tree_probabilities(self, features) -> np.ndarray:
        """
        Returns the ``(trees, rows)`` matrix of per-tree malware frequencies.
        """
        x = self._as_matrix(features)
        return np.vstack([t.predict(x) for t in self._trees])

    def _predict_proba(self, x: sp.csr_matrix) -> np.ndarray:
        probs = np.zeros(x.shape[0], dtype=np.float64)
        for t in self._trees:
            probs += t.predict(x)
        return np.clip(probs / len(self._trees), 0.0, 1.0)

    def feature_importance(self) -> np.ndarray:
        self._check_fitted()
        return normalized_importance(self._trees, self._dimension)

    def _state_to_cbor(self) -> Dict[str, Any]:
        return {"trees": trees_to_cbor(self._trees)}

    def _state_from_cbor(self, state: Any) -> None:
        self._trees = trees_from_cbor(state.get("trees") if isinstance(state, dict) else None)
