"""
Greedy binary-split trees over sparse binary features.

A split on feature ``f`` sends samples with ``x_f = 0`` left and ``x_f = 1``
right. Per-feature child statistics are obtained for all features at once
with one sparse matrix-vector product per statistic.
"""
from typing import Any, List, Optional, Tuple

import numpy as np
import scipy.sparse as sp

from ..exceptions import DecodeError
from ..numerics.rng import RngStream

# Gains within this distance of zero are treated as zero.
_GAIN_TOL = 1e-12

LEAF = -1


class Tree:
    """
    A fitted tree stored as preorder node arrays. ``feature[i]`` is -1 for
    leaves; ``value[i]`` is the leaf output; ``gain[i]`` is the split gain of
    an inner node.
    """

    def __init__(
        self,
        feature: np.ndarray,
        left: np.ndarray,
        right: np.ndarray,
        value: np.ndarray,
        gain: np.ndarray,
    ):
        self.feature = np.asarray(feature, dtype=np.int64)
        self.left = np.asarray(left, dtype=np.int64)
        self.right = np.asarray(right, dtype=np.int64)
        self.value = np.asarray(value, dtype=np.float64)
        self.gain = np.asarray(gain, dtype=np.float64)
        n = self.feature.size
        if not (self.left.size == self.right.size == self.value.size == self.gain.size == n) or n == 0:
            raise DecodeError("tree arrays should be non-empty and aligned.")

    def __len__(self) -> int:
        return int(self.feature.size)

    @property
    def depth(self) -> int:
        depth = np.zeros(len(self), dtype=np.int64)
        for i in range(len(self)):
            if self.feature[i] != LEAF:
                depth[self.left[i]] = depth[i] + 1
                depth[self.right[i]] = depth[i] + 1
        return int(depth.max())

    def apply(self, x: sp.csr_matrix) -> np.ndarray:
        """
        Returns the leaf reached by every row of ``x``.
        """
        node = np.zeros(x.shape[0], dtype=np.int64)
        active = np.flatnonzero(self.feature[node] != LEAF)
        while active.size > 0:
            f = self.feature[node[active]]
            bit = np.asarray(x[active, f]).reshape(-1) > 0
            node[active] = np.where(bit, self.right[node[active]], self.left[node[active]])
            active = active[self.feature[node[active]] != LEAF]
        return node

    def predict(self, x: sp.csr_matrix) -> np.ndarray:
        return self.value[self.apply(x)]

    def add_importance(self, out: np.ndarray) -> None:
        inner = self.feature != LEAF
        np.add.at(out, self.feature[inner], self.gain[inner])

    def to_cbor(self) -> List[Any]:
        return [
            self.feature.tolist(),
            self.left.tolist(),
            self.right.tolist(),
            self.value.astype("<f8").tobytes(),
            self.gain.astype("<f8").tobytes(),
        ]

    @classmethod
    def from_cbor(cls, v: Any) -> "Tree":
        if not isinstance(v, list) or len(v) != 5:
            raise DecodeError("tree should be [feature, left, right, value, gain].")
        try:
            return cls(
                np.array(v[0]),
                np.array(v[1]),
                np.array(v[2]),
                np.frombuffer(v[3], dtype="<f8"),
                np.frombuffer(v[4], dtype="<f8"),
            )
        except (TypeError, ValueError) as err:
            raise DecodeError("Failed to decode tree.") from err


class SplitScorer:
    """
    The interface class for node statistics of a tree learner.
    """

    def gains(self, x_node: sp.csr_matrix, rows: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """
        Returns the gain of splitting ``rows`` on every feature and the mask of
        admissible splits.
        """
        raise NotImplementedError

    def leaf_value(self, rows: np.ndarray) -> float:
        raise NotImplementedError

    def mixed(self, rows: np.ndarray) -> bool:
        raise NotImplementedError


def _impurity(pos: np.ndarray, total: np.ndarray, criterion: str) -> np.ndarray:
    with np.errstate(divide="ignore", invalid="ignore"):
        p = np.where(total > 0, pos / np.where(total > 0, total, 1.0), 0.0)
    p = np.clip(p, 0.0, 1.0)
    if criterion == "gini":
        return 2.0 * p * (1.0 - p)
    q = 1.0 - p
    with np.errstate(divide="ignore", invalid="ignore"):
        return -(np.where(p > 0, p * np.log2(p), 0.0) + np.where(q > 0, q * np.log2(q), 0.0))


class ImpurityScorer(SplitScorer):
    """
    Weighted impurity decrease for binary classification; ``criterion`` is
    ``gini``, ``entropy`` or ``log_loss`` (the latter two coincide).
    """

    def __init__(self, y: np.ndarray, weights: np.ndarray, criterion: str):
        self.y = y.astype(np.float64)
        self.w = weights.astype(np.float64)
        self.wy = self.w * self.y
        self.criterion = criterion

    def gains(self, x_node: sp.csr_matrix, rows: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        w_all = self.w[rows].sum()
        p_all = self.wy[rows].sum()
        w_r = np.asarray(x_node.T @ self.w[rows]).reshape(-1)
        p_r = np.asarray(x_node.T @ self.wy[rows]).reshape(-1)
        cnt_r = np.asarray(x_node.sum(axis=0)).reshape(-1)
        w_l = w_all - w_r
        p_l = p_all - p_r
        parent = w_all * _impurity(np.array([p_all]), np.array([w_all]), self.criterion)[0]
        gain = parent - w_l * _impurity(p_l, w_l, self.criterion) - w_r * _impurity(p_r, w_r, self.criterion)
        valid = (cnt_r > 0) & (cnt_r < rows.size)
        return gain, valid

    def leaf_value(self, rows: np.ndarray) -> float:
        w = self.w[rows].sum()
        return float(self.wy[rows].sum() / w) if w > 0 else 0.0

    def mixed(self, rows: np.ndarray) -> bool:
        y = self.y[rows]
        return bool(y.size > 0 and y.min() != y.max())


def soft_threshold(g: np.ndarray, alpha: float) -> np.ndarray:
    return np.sign(g) * np.maximum(np.abs(g) - alpha, 0.0)


class NewtonScorer(SplitScorer):
    """
    Second-order boosting statistics with L1 (``alpha``) and L2 (``lam``)
    leaf regularization and a minimum child hessian.
    """

    def __init__(self, y: np.ndarray, g: np.ndarray, h: np.ndarray, alpha: float, lam: float, min_child_weight: float):
        self.y = y
        self.g = g
        self.h = h
        self.alpha = alpha
        self.lam = lam
        self.min_child_weight = min_child_weight

    def _score(self, g: np.ndarray, h: np.ndarray) -> np.ndarray:
        return soft_threshold(g, self.alpha) ** 2 / (h + self.lam)

    def gains(self, x_node: sp.csr_matrix, rows: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        g_all = self.g[rows].sum()
        h_all = self.h[rows].sum()
        g_r = np.asarray(x_node.T @ self.g[rows]).reshape(-1)
        h_r = np.asarray(x_node.T @ self.h[rows]).reshape(-1)
        cnt_r = np.asarray(x_node.sum(axis=0)).reshape(-1)
        g_l = g_all - g_r
        h_l = h_all - h_r
        with np.errstate(divide="ignore", invalid="ignore"):
            gain = 0.5 * (
                self._score(g_l, h_l) + self._score(g_r, h_r) - self._score(np.array([g_all]), np.array([h_all]))[0]
            )
        valid = (
            (cnt_r > 0)
            & (cnt_r < rows.size)
            & (h_l >= self.min_child_weight)
            & (h_r >= self.min_child_weight)
        )
        return np.nan_to_num(gain, nan=-np.inf), valid

    def leaf_value(self, rows: np.ndarray) -> float:
        g = self.g[rows].sum()
        h = self.h[rows].sum()
        return float(-soft_threshold(np.array([g]), self.alpha)[0] / (h + self.lam))

    def mixed(self, rows: np.ndarray) -> bool:
        y = self.y[rows]
        return bool(y.size > 0 and y.min() != y.max())


def grow_tree(
    x: sp.csr_matrix,
    rows: np.ndarray,
    scorer: SplitScorer,
    max_depth: int,
    max_features: Optional[int] = None,
    rng: Optional[RngStream] = None,
) -> Tree:
    """
    Grows a tree greedily from the root.

    A node splits on the admissible feature with the largest gain (ties go to
    the lowest feature index). When that gain is zero the node still splits
    if it holds both classes, so interaction patterns such as XOR remain
    learnable. With ``max_features`` a random feature subset of that size is
    scored per node, falling back to all features when the subset admits no
    split.

    Args:
        x (sp.csr_matrix): The binary feature matrix.
        rows (np.ndarray): The training rows of ``x``.
        scorer (SplitScorer): Node statistics.
        max_depth (int): Maximum depth (root at depth 0).
        max_features (Optional[int]): Features sampled per node.
        rng (Optional[RngStream]): Feature sampling stream.
    Returns:
        Tree: The fitted tree.
    """
    n_features = x.shape[1]
    feature: List[int] = []
    left: List[int] = []
    right: List[int] = []
    value: List[float] = []
    gain: List[float] = []
    # (rows, depth, parent, is_right)
    stack: List[Tuple[np.ndarray, int, int, bool]] = [(np.asarray(rows, dtype=np.int64), 0, -1, False)]
    while stack:
        node_rows, depth, parent, is_right = stack.pop()
        idx = len(feature)
        if parent >= 0:
            (right if is_right else left)[parent] = idx
        feature.append(LEAF)
        left.append(-1)
        right.append(-1)
        value.append(scorer.leaf_value(node_rows))
        gain.append(0.0)
        if depth >= max_depth or node_rows.size < 2:
            continue
        x_node = x[node_rows]
        gains, valid = scorer.gains(x_node, node_rows)
        if max_features is not None and max_features < n_features and rng is not None:
            subset = np.zeros(n_features, dtype=bool)
            subset[rng.choice(n_features, size=max_features, replace=False)] = True
            if np.any(valid & subset):
                valid = valid & subset
        if not np.any(valid):
            continue
        masked = np.where(valid, gains, -np.inf)
        top = float(masked.max())
        tol = _GAIN_TOL * max(1.0, float(np.abs(gains[valid]).max()))
        best = int(np.flatnonzero(masked >= top - tol)[0])
        best_gain = top
        if best_gain <= tol:
            if best_gain < -tol or not scorer.mixed(node_rows):
                continue
            best_gain = 0.0
        bit = np.asarray(x_node[:, best].todense()).reshape(-1) > 0
        feature[idx] = best
        gain[idx] = best_gain
        stack.append((node_rows[bit], depth + 1, idx, True))
        stack.append((node_rows[~bit], depth + 1, idx, False))
    return Tree(
        np.array(feature),
        np.array(left),
        np.array(right),
        np.array(value),
        np.array(gain),
    )


def normalized_importance(trees: List[Tree], n_features: int) -> np.ndarray:
    out = np.zeros(n_features, dtype=np.float64)
    for t in trees:
        t.add_importance(out)
    total = out.sum()
    return out / total if total > 0 else out


def trees_to_cbor(trees: List[Tree]) -> List[Any]:
    return [t.to_cbor() for t in trees]


def trees_from_cbor(v: Any) -> List[Tree]:
    if not isinstance(v, list):
        raise DecodeError("trees should be list.")
    return [Tree.from_cbor(t) for t in v]


