from dataclasses import dataclass
from typing import Tuple

import numpy as np

from .const import MALWARE, PROB_CLAMP
from .exceptions import SpecificationError
from .numerics.rng import RngStream
from .utils import check_finite

# Distances below this count as coincident points (zero gradient).
_COINCIDENT = 1e-9


def clamp_probs(probs: np.ndarray) -> np.ndarray:
    return np.clip(np.asarray(probs, dtype=np.float64), PROB_CLAMP, 1.0 - PROB_CLAMP)


def bce_loss(probs: np.ndarray, labels: np.ndarray) -> Tuple[float, np.ndarray]:
    """
    Binary cross-entropy averaged over the batch.

    Args:
        probs (np.ndarray): Predicted malware probabilities (sigmoid of the
            logits).
        labels (np.ndarray): Binary labels.
    Returns:
        Tuple[float, np.ndarray]: The loss and its gradient with respect to
        the pre-sigmoid logits, ``(p - y) / N``.
    Raises:
        SpecificationError: Length mismatch.
    """
    p = np.asarray(probs, dtype=np.float64).reshape(-1)
    y = np.asarray(labels, dtype=np.float64).reshape(-1)
    if p.size != y.size:
        raise SpecificationError("probs and labels should have the same length.")
    if p.size == 0:
        return 0.0, np.zeros(0)
    pc = clamp_probs(p)
    loss = -float(np.mean(y * np.log(pc) + (1.0 - y) * np.log1p(-pc)))
    return loss, (p - y) / p.size


def bce_terms(probs: np.ndarray, labels: np.ndarray) -> np.ndarray:
    """
    Per-sample binary cross-entropy.
    """
    pc = clamp_probs(probs)
    y = np.asarray(labels, dtype=np.float64)
    return -(y * np.log(pc) + (1.0 - y) * np.log1p(-pc))


@dataclass
class TripletBatch:
    """
    Aligned anchor, positive and negative positions into a batch.
    """

    anchor: np.ndarray
    positive: np.ndarray
    negative: np.ndarray

    def __post_init__(self):
        self.anchor = np.asarray(self.anchor, dtype=np.int64).reshape(-1)
        self.positive = np.asarray(self.positive, dtype=np.int64).reshape(-1)
        self.negative = np.asarray(self.negative, dtype=np.int64).reshape(-1)
        if not (self.anchor.size == self.positive.size == self.negative.size):
            raise SpecificationError("anchor, positive and negative should be aligned.")

    def __len__(self) -> int:
        return int(self.anchor.size)

    def validate(self, labels: np.ndarray) -> "TripletBatch":
        y = np.asarray(labels)
        if np.any(y[self.anchor] != y[self.positive]):
            raise SpecificationError("positive should share the anchor label.")
        if np.any(y[self.anchor] == y[self.negative]):
            raise SpecificationError("negative should differ from the anchor label.")
        return self


def mine_triplets(labels: np.ndarray, rng: RngStream) -> TripletBatch:
    """
    Picks, for every anchor that has both, one same-label positive (other
    than itself) and one opposite-label negative uniformly within the batch.
    """
    y = np.asarray(labels).reshape(-1)
    anchors, positives, negatives = [], [], []
    for i in range(y.size):
        same = np.flatnonzero(y == y[i])
        same = same[same != i]
        other = np.flatnonzero(y != y[i])
        if same.size == 0 or other.size == 0:
            continue
        anchors.append(i)
        positives.append(int(same[rng.integers(0, same.size)]))
        negatives.append(int(other[rng.integers(0, other.size)]))
    return TripletBatch(np.array(anchors), np.array(positives), np.array(negatives))


def triplet_loss(embeddings: np.ndarray, triplets: TripletBatch, margin: float) -> Tuple[float, np.ndarray]:
    """
    Triplet margin loss over squared Euclidean distances,
    ``mean(max(0, |a - p|^2 - |a - n|^2 + m))``. An empty triplet list gives 0.

    Returns:
        Tuple[float, np.ndarray]: The loss and its gradient with respect to
        ``embeddings``.
    """
    if not margin > 0.0:
        raise SpecificationError("margin should be positive.")
    e = np.asarray(embeddings, dtype=np.float64)
    grad = np.zeros_like(e)
    n = len(triplets)
    if n == 0:
        return 0.0, grad
    a = e[triplets.anchor]
    p = e[triplets.positive]
    q = e[triplets.negative]
    d_ap = np.sum((a - p) ** 2, axis=1)
    d_an = np.sum((a - q) ** 2, axis=1)
    raw = d_ap - d_an + margin
    active = (raw > 0.0)[:, None] / n
    np.add.at(grad, triplets.anchor, active * 2.0 * (q - p))
    np.add.at(grad, triplets.positive, active * -2.0 * (a - p))
    np.add.at(grad, triplets.negative, active * 2.0 * (a - q))
    return float(np.sum(np.maximum(raw, 0.0)) / n), grad


@dataclass
class PairSets:
    """
    Boolean ``(anchors, partners)`` masks: ``positive`` holds same-label pairs
    outside a shared malware family, ``family`` same-family malware pairs and
    ``negative`` opposite-label pairs.
    """

    positive: np.ndarray
    family: np.ndarray
    negative: np.ndarray

    def anchors(self) -> np.ndarray:
        """
        Anchors with at least one partner in some set.
        """
        return np.flatnonzero((self.positive | self.family | self.negative).any(axis=1))


def _pair_masks(
    labels_a: np.ndarray,
    families_a: np.ndarray,
    labels_b: np.ndarray,
    families_b: np.ndarray,
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    same_label = labels_a == labels_b
    same_family = (
        same_label
        & (labels_a == MALWARE)
        & (families_a >= 0)
        & (families_a == families_b)
    )
    return same_label & ~same_family, same_family, ~same_label


def build_pair_sets(labels: np.ndarray, families: np.ndarray) -> PairSets:
    """
    Builds the pair sets of a batch. Malware without a family is its own
    singleton family; self pairs are excluded.
    """
    y = np.asarray(labels).reshape(-1)
    f = np.asarray(families).reshape(-1)
    if y.size != f.size:
        raise SpecificationError("labels and families should have the same length.")
    pos, fam, neg = _pair_masks(y[:, None], f[:, None], y[None, :], f[None, :])
    off = ~np.eye(y.size, dtype=bool)
    return PairSets(pos & off, fam & off, neg & off)


def _pairwise_distances(e: np.ndarray) -> np.ndarray:
    sq = np.sum(e * e, axis=1)
    d2 = sq[:, None] + sq[None, :] - 2.0 * (e @ e.T)
    np.maximum(d2, 0.0, out=d2)
    np.fill_diagonal(d2, 0.0)
    return np.sqrt(d2)


def _hcc_terms(d: np.ndarray, sets: PairSets, margin: float) -> Tuple[np.ndarray, np.ndarray]:
    """
    Returns per-anchor losses and the coefficients ``dLoss_i / d(d_ij)``.
    """
    n_pos = sets.positive.sum(axis=1)
    n_fam = sets.family.sum(axis=1)
    n_neg = sets.negative.sum(axis=1)
    inv = [1.0 / np.maximum(c, 1)[:, None] for c in (n_pos, n_fam, n_neg)]
    pos_hinge = np.maximum(d - margin, 0.0) * sets.positive
    neg_hinge = np.maximum(2.0 * margin - d, 0.0) * sets.negative
    per_anchor = (
        pos_hinge.sum(axis=1) * inv[0][:, 0]
        + (d * sets.family).sum(axis=1) * inv[1][:, 0]
        + neg_hinge.sum(axis=1) * inv[2][:, 0]
    )
    coef = (
        ((d > margin) & sets.positive) * inv[0]
        + sets.family * inv[1]
        - ((d < 2.0 * margin) & sets.negative) * inv[2]
    )
    return per_anchor, coef


def hcc_loss(embeddings: np.ndarray, pair_sets: PairSets, margin: float) -> Tuple[float, np.ndarray]:
    """
    Hierarchical contrastive loss over unsquared Euclidean distances. For
    every anchor it adds the mean of ``max(0, d - m)`` over same-label
    partners, the mean of ``d`` over same-family partners and the mean of
    ``max(0, 2m - d)`` over opposite-label partners; empty sets add 0 and
    anchors without partners are left out of the batch mean.

    Returns:
        Tuple[float, np.ndarray]: The loss and its gradient with respect to
        ``embeddings``.
    """
    if not margin > 0.0:
        raise SpecificationError("margin should be positive.")
    e = np.asarray(embeddings, dtype=np.float64)
    grad = np.zeros_like(e)
    anchors = pair_sets.anchors()
    if anchors.size == 0:
        return 0.0, grad
    d = _pairwise_distances(e)
    per_anchor, coef = _hcc_terms(d, pair_sets, margin)
    valid = np.zeros(e.shape[0], dtype=bool)
    valid[anchors] = True
    coef = coef * valid[:, None] / anchors.size
    w = np.where(d > _COINCIDENT, coef / np.where(d > _COINCIDENT, d, 1.0), 0.0)
    grad = w.sum(axis=1)[:, None] * e - w @ e + w.sum(axis=0)[:, None] * e - w.T @ e
    return float(per_anchor[anchors].sum() / anchors.size), check_finite(grad, "hcc gradient")


def hcc_anchor_loss(
    anchor_embeddings: np.ndarray,
    anchor_labels: np.ndarray,
    anchor_families: np.ndarray,
    neighbor_embeddings: np.ndarray,
    neighbor_labels: np.ndarray,
    neighbor_families: np.ndarray,
    margin: float,
) -> np.ndarray:
    """
    Per-anchor hierarchical contrastive loss against each anchor's own
    neighbors.

    Args:
        anchor_embeddings (np.ndarray): ``(q, dim)`` anchor embeddings.
        anchor_labels (np.ndarray): ``(q,)`` (pseudo) labels.
        anchor_families (np.ndarray): ``(q,)`` families, -1 for none.
        neighbor_embeddings (np.ndarray): ``(q, k, dim)`` neighbor embeddings.
        neighbor_labels (np.ndarray): ``(q, k)`` neighbor labels.
        neighbor_families (np.ndarray): ``(q, k)`` neighbor families.
        margin (float): The margin m.
    Returns:
        np.ndarray: ``(q,)`` losses.
    """
    a = np.asarray(anchor_embeddings, dtype=np.float64)
    nb = np.asarray(neighbor_embeddings, dtype=np.float64)
    d = np.linalg.norm(nb - a[:, None, :], axis=2)
    sets = PairSets(
        *_pair_masks(
            np.asarray(anchor_labels)[:, None],
            np.asarray(anchor_families)[:, None],
            np.asarray(neighbor_labels),
            np.asarray(neighbor_families),
        )
    )
    per_anchor, _ = _hcc_terms(d, sets, margin)
    return per_anchor


def combined_loss(bce: float, contrastive: float, xent_lambda: float) -> float:
    """
    ``xent_lambda * bce + contrastive``.
    """
    if xent_lambda < 0.0:
        raise SpecificationError("xent_lambda should be non-negative.")
    return xent_lambda * bce + contrastive


