# pylint: disable=R0201, R0904, W0621
# R0201: Method could be a function
# R0904: Too many public methods
# W0621: Redefined outer name

"""
Tests for the training losses.
"""
import math

import numpy as np
import pytest

from driftbench import SpecificationError, bce_loss, build_pair_sets, hcc_loss, mine_triplets, triplet_loss
from driftbench.losses import TripletBatch, combined_loss, hcc_anchor_loss
from driftbench.numerics import RngStream, check_gradients
from driftbench.utils import sigmoid


def _pairs(mask):
    return {(int(i), int(j)) for i, j in zip(*np.nonzero(mask))}


class TestLosses:
    """
    Tests for bce_loss, triplet_loss, hcc_loss and build_pair_sets.
    """

    def test_bce_confident_and_correct(self):
        loss, _ = bce_loss(np.array([1.0]), np.array([1]))
        assert loss == pytest.approx(0.0, abs=1e-9)

    def test_bce_half(self):
        loss, grad = bce_loss(np.array([0.5]), np.array([1]))
        assert loss == pytest.approx(math.log(2.0), abs=1e-6)
        assert grad.tolist() == [-0.5]

    def test_bce_clamps_zero_probability(self):
        loss, _ = bce_loss(np.array([0.0]), np.array([1]))
        assert np.isfinite(loss)

    def test_bce_gradient_matches_finite_differences(self):
        rng = RngStream(4)
        z = rng.uniform(-2.0, 2.0, 16)
        y = (rng.random(16) < 0.5).astype(np.float64)
        _, grad = bce_loss(sigmoid(z), y)
        assert check_gradients(lambda v: bce_loss(sigmoid(v), y)[0], z, grad) < 1e-6

    def test_bce_with_length_mismatch(self):
        with pytest.raises(SpecificationError) as err:
            bce_loss(np.array([0.5, 0.5]), np.array([1]))
            pytest.fail("bce_loss() should fail.")
        assert "probs and labels should have the same length." in str(err.value)

    def test_triplet_formula(self):
        e = np.array([[0.0], [1.0], [2.0]])
        loss, _ = triplet_loss(e, TripletBatch([0], [1], [2]), 10.0)
        assert loss == pytest.approx(7.0)

    def test_triplet_margin_satisfied(self):
        e = np.array([[0.0], [0.0], [4.0]])
        loss, grad = triplet_loss(e, TripletBatch([0], [1], [2]), 10.0)
        assert loss == 0.0
        assert np.all(grad == 0.0)

    def test_triplet_empty(self):
        loss, grad = triplet_loss(np.zeros((2, 3)), TripletBatch([], [], []), 1.0)
        assert loss == 0.0
        assert grad.shape == (2, 3)

    def test_triplet_gradient_matches_finite_differences(self):
        e = RngStream(5).uniform(-1.0, 1.0, (8, 3))
        y = np.array([0, 0, 0, 0, 1, 1, 1, 1])
        triplets = mine_triplets(y, RngStream(6)).validate(y)
        _, grad = triplet_loss(e, triplets, 2.0)
        assert np.any(grad != 0.0)
        assert check_gradients(lambda v: triplet_loss(v, triplets, 2.0)[0], e, grad, floor=1e-3) < 1e-6

    def test_mine_triplets(self):
        y = np.array([0, 0, 1, 1, 1])
        triplets = mine_triplets(y, RngStream(0))
        assert len(triplets) == 5
        triplets.validate(y)
        assert np.all(triplets.anchor != triplets.positive)

    def test_mine_triplets_skips_lonely_anchors(self):
        triplets = mine_triplets(np.array([0, 1, 1]), RngStream(0))
        assert triplets.anchor.tolist() == [1, 2]

    def test_hcc_formula(self):
        # Anchor 0 (malware, family 0), P partner at 12 (malware, family 1),
        # Pz partner at 3 (malware, family 0), N partner at 15 (benign).
        e = np.array([[0.0, 0.0], [12.0, 0.0], [0.0, 3.0], [0.0, -15.0]])
        sets = build_pair_sets(np.array([1, 1, 1, 0]), np.array([0, 1, 0, -1]))
        per_anchor = hcc_anchor_loss(
            e[:1],
            np.array([1]),
            np.array([0]),
            e[None, 1:],
            np.array([[1, 1, 0]]),
            np.array([[1, 0, -1]]),
            10.0,
        )
        assert per_anchor.tolist() == pytest.approx([10.0])
        assert sets.family[0].tolist() == [False, False, True, False]

    def test_hcc_constraints_satisfied(self):
        e = np.array([[0.0], [0.0], [1.0], [30.0], [31.0]])
        sets = build_pair_sets(np.array([1, 1, 1, 0, 0]), np.array([0, 0, 1, -1, -1]))
        loss, grad = hcc_loss(e, sets, 10.0)
        assert loss == 0.0
        assert np.all(grad == 0.0)

    def test_hcc_gradient_matches_finite_differences(self):
        e = RngStream(8).uniform(-3.0, 3.0, (8, 3))
        sets = build_pair_sets(np.array([0, 0, 0, 1, 1, 1, 1, 1]), np.array([-1, -1, -1, 0, 0, 1, 1, -1]))
        _, grad = hcc_loss(e, sets, 2.0)
        assert np.any(grad != 0.0)
        assert check_gradients(lambda v: hcc_loss(v, sets, 2.0)[0], e, grad, floor=1e-3) < 1e-6

    def test_hcc_without_pairs(self):
        loss, grad = hcc_loss(np.zeros((1, 2)), build_pair_sets(np.array([1]), np.array([0])), 1.0)
        assert loss == 0.0
        assert np.all(grad == 0.0)

    @pytest.mark.parametrize(
        "lam, bce, contrastive, expected",
        [
            (0.0, 0.5, 7.0, 7.0),
            (100.0, 0.5, 7.0, 57.0),
            (100.0, 0.0, 0.0, 0.0),
        ],
    )
    def test_combined_loss(self, lam, bce, contrastive, expected):
        assert combined_loss(bce, contrastive, lam) == pytest.approx(expected)

    def test_combined_loss_with_negative_lambda(self):
        with pytest.raises(SpecificationError) as err:
            combined_loss(0.5, 1.0, -1.0)
            pytest.fail("combined_loss() should fail.")
        assert "xent_lambda should be non-negative." in str(err.value)

    def test_pair_sets_two_benign_two_same_family(self):
        sets = build_pair_sets(np.array([0, 0, 1, 1]), np.array([-1, -1, 3, 3]))
        assert _pairs(sets.family) == {(2, 3), (3, 2)}
        assert _pairs(sets.positive) == {(0, 1), (1, 0)}
        assert _pairs(sets.negative) == {(0, 2), (0, 3), (1, 2), (1, 3), (2, 0), (3, 0), (2, 1), (3, 1)}

    def test_pair_sets_all_benign(self):
        sets = build_pair_sets(np.array([0, 0, 0]), np.array([-1, -1, -1]))
        assert not sets.family.any()
        assert not sets.negative.any()
        assert _pairs(sets.positive) == {(i, j) for i in range(3) for j in range(3) if i != j}

    def test_pair_sets_different_families(self):
        sets = build_pair_sets(np.array([1, 1]), np.array([0, 1]))
        assert _pairs(sets.positive) == {(0, 1), (1, 0)}
        assert not sets.family.any()

    def test_pair_sets_missing_family_is_singleton(self):
        sets = build_pair_sets(np.array([1, 1]), np.array([-1, -1]))
        assert not sets.family.any()
        assert _pairs(sets.positive) == {(0, 1), (1, 0)}
