# pylint: disable=R0201, R0904, W0621
# R0201: Method could be a function
# R0904: Too many public methods
# W0621: Redefined outer name

"""
Tests for the numerics kernel.
"""
import numpy as np
import pytest
import scipy.sparse as sp

from driftbench import DecodeError, NumericError, SpecificationError, UnsupportedFormatError, UsageError
from driftbench.numerics import (
    FeedForwardNet,
    OptimizerState,
    RngStream,
    StepSchedule,
    as_tensor2,
    check_gradients,
    optimizer_step,
    params_from_blob,
    params_to_blob,
    schedule_lr,
)


@pytest.fixture(scope="session", autouse=True)
def batch():
    return RngStream(1).uniform(-1.0, 1.0, (5, 3))


class TestNumerics:
    """
    Tests for RngStream, FeedForwardNet, OptimizerState and StepSchedule.
    """

    def test_rng_stream_is_reproducible(self):
        a = RngStream(42)
        b = RngStream(42)
        assert a.random(5).tolist() == b.random(5).tolist()
        assert a.child("x").random(3).tolist() == RngStream(42).child("x").random(3).tolist()
        assert a.child("x").random(3).tolist() != a.child("y").random(3).tolist()

    def test_rng_stream_child_ignores_parent_draws(self):
        a = RngStream(7)
        before = a.child("k").random(4).tolist()
        a.random(100)
        assert a.child("k").random(4).tolist() == before

    @pytest.mark.parametrize(
        "invalid, msg",
        [
            (-1, "seed should be u64."),
            (2 ** 64, "seed should be u64."),
            (1.5, "seed should be int."),
            (True, "seed should be int."),
        ],
    )
    def test_rng_stream_with_invalid_seed(self, invalid, msg):
        with pytest.raises(SpecificationError) as err:
            RngStream(invalid)
            pytest.fail("RngStream() should fail.")
        assert msg in str(err.value)

    def test_as_tensor2(self):
        assert as_tensor2([[1, 2]], 1, 2).dtype == np.float64
        with pytest.raises(SpecificationError) as err:
            as_tensor2([1, 2])
            pytest.fail("as_tensor2() should fail.")
        assert "tensor should be 2-dimensional." in str(err.value)
        with pytest.raises(NumericError):
            as_tensor2([[np.inf]])
            pytest.fail("as_tensor2() should fail.")

    def test_forward_zero_net(self, batch):
        net = FeedForwardNet.new([3, 4, 1])
        hidden, out = net.forward(batch)
        assert out.shape == (5, 1)
        assert np.all(out == 0.0)
        assert len(hidden) == 1

    def test_forward_identity_layer(self, batch):
        net = FeedForwardNet([np.eye(3)], [np.array([1.0, 2.0, 3.0])])
        _, out = net.forward(batch)
        assert np.allclose(out, batch + np.array([1.0, 2.0, 3.0]))

    def test_forward_sparse_equals_dense(self, batch):
        net = FeedForwardNet.new([3, 4, 2], rng=RngStream(3))
        x = (batch > 0).astype(np.float64)
        _, dense = net.forward(x)
        _, sparse = net.forward(sp.csr_matrix(x))
        assert np.allclose(dense, sparse)

    def test_forward_train_without_dropout_equals_eval(self, batch):
        net = FeedForwardNet.new([3, 6, 1], dropout=0.0, rng=RngStream(3))
        _, train = net.forward(batch, "train")
        _, evaluated = net.forward(batch, "eval")
        assert np.array_equal(train, evaluated)

    def test_forward_dropout_is_seeded(self, batch):
        net = FeedForwardNet.new([3, 64, 1], dropout=0.5, rng=RngStream(3))
        _, a = net.forward(batch, "train", RngStream(9))
        _, b = net.forward(batch, "train", RngStream(9))
        _, c = net.forward(batch, "eval")
        assert np.array_equal(a, b)
        assert not np.allclose(a, c)

    def test_forward_dropout_mean_matches_eval(self):
        # 10^4 copies of one row draw 10^4 independent masks.
        net = FeedForwardNet.new([3, 16, 1], dropout=0.2, rng=RngStream(3))
        x = np.tile(np.array([[1.0, -0.5, 2.0]]), (10000, 1))
        train, _ = net.forward(x, "train", RngStream(11))
        evaluated, _ = net.forward(x[:1], "eval")
        active = evaluated[0][0] > 0.0
        assert active.any()
        mean = train[0].mean(axis=0)
        assert np.allclose(mean[active], evaluated[0][0][active], rtol=0.02, atol=0.0)
        assert np.all(mean[~active] == 0.0)

    def test_forward_dropout_without_rng(self, batch):
        net = FeedForwardNet.new([3, 4, 1], dropout=0.5, rng=RngStream(3))
        with pytest.raises(UsageError) as err:
            net.forward(batch, "train")
            pytest.fail("forward() should fail.")
        assert "rng is required in train mode with dropout." in str(err.value)

    @pytest.mark.parametrize(
        "widths, dropout, msg",
        [
            ([3], 0.0, "widths should be at least two positive ints."),
            ([3, 0, 1], 0.0, "widths should be at least two positive ints."),
            ([3, 4, 1], 1.0, "dropout should be in [0, 1)."),
            ([3, 4, 1], [0.1, 0.1], "dropout should have one rate per hidden layer."),
        ],
    )
    def test_new_with_invalid_args(self, widths, dropout, msg):
        with pytest.raises(SpecificationError) as err:
            FeedForwardNet.new(widths, dropout)
            pytest.fail("FeedForwardNet.new() should fail.")
        assert msg in str(err.value)

    def test_forward_with_shape_mismatch(self, batch):
        net = FeedForwardNet.new([4, 1])
        with pytest.raises(SpecificationError) as err:
            net.forward(batch)
            pytest.fail("forward() should fail.")
        assert "batch should have 4 columns" in str(err.value)

    def test_backward_without_forward(self):
        net = FeedForwardNet.new([3, 1])
        with pytest.raises(UsageError) as err:
            net.backward(np.zeros((1, 1)))
            pytest.fail("backward() should fail.")
        assert "backward should follow a train-mode forward." in str(err.value)

    def test_backward_zero_upstream(self, batch):
        net = FeedForwardNet.new([3, 4, 1], rng=RngStream(5))
        net.forward(batch, "train")
        grads, _ = net.backward(np.zeros((5, 1)))
        assert all(np.all(g == 0.0) for g in grads)

    def test_backward_linear_quadratic_closed_form(self, batch):
        w = np.array([[0.5], [-1.0], [2.0]])
        b = np.array([0.25])
        net = FeedForwardNet([w], [b])
        _, out = net.forward(batch, "train")
        # loss = sum(out^2) / 2, so dLoss/dOut = out.
        grads, dx = net.backward(out)
        assert np.allclose(grads[0], batch.T @ out)
        assert np.allclose(grads[1], out.sum(axis=0))
        assert np.allclose(dx, out @ w.T)

    def test_backward_matches_finite_differences(self, batch):
        net = FeedForwardNet.new([3, 5, 4, 2], rng=RngStream(11))
        r = RngStream(12).uniform(-1.0, 1.0, (5, 2))

        def loss(_):
            return float(np.sum(net.forward(batch, "eval")[1] * r))

        net.forward(batch, "train")
        grads, _ = net.backward(r)
        for p, g in zip(net.params, grads):
            assert check_gradients(loss, p, g, floor=1e-3) < 1e-6

    def test_sgd_step(self):
        params = [np.array([1.0])]
        optimizer_step(OptimizerState("SGD", 0.1), params, [np.array([1.0])])
        assert params[0][0] == pytest.approx(0.9)

    def test_adam_first_step_moves_by_lr(self):
        params = [np.array([1.0, -2.0])]
        state = OptimizerState("Adam", 0.01)
        state.step(params, [np.array([0.5, -3.0])])
        assert params[0][0] == pytest.approx(0.99, rel=1e-6)
        assert params[0][1] == pytest.approx(-1.99, rel=1e-6)
        assert state.t == 1

    def test_adam_zero_grads(self):
        params = [np.array([1.0, 2.0])]
        state = OptimizerState("Adam", 0.01)
        state.step(params, [np.zeros(2)])
        assert params[0].tolist() == [1.0, 2.0]

    def test_optimizer_state_copy_is_independent(self):
        params = [np.array([1.0])]
        state = OptimizerState("Adam", 0.01)
        state.step(params, [np.array([1.0])])
        clone = state.copy()
        state.step(params, [np.array([1.0])])
        assert clone.t == 1
        assert clone.m[0][0] != state.m[0][0]

    @pytest.mark.parametrize(
        "kind, lr, msg",
        [
            ("RMSprop", 0.1, "Unknown optimizer: RMSprop."),
            ("SGD", 0.0, "lr should be positive."),
        ],
    )
    def test_optimizer_with_invalid_args(self, kind, lr, msg):
        with pytest.raises(SpecificationError) as err:
            OptimizerState(kind, lr)
            pytest.fail("OptimizerState() should fail.")
        assert msg in str(err.value)

    @pytest.mark.parametrize(
        "step, gamma, epoch, factor",
        [
            (10, 0.5, 0, 1.0),
            (10, 0.5, 9, 1.0),
            (10, 0.5, 10, 0.5),
            (10, 0.5, 25, 0.25),
            (10, 1.0, 95, 1.0),
        ],
    )
    def test_step_schedule(self, step, gamma, epoch, factor):
        assert schedule_lr(StepSchedule(step, gamma), epoch, 0.2) == pytest.approx(0.2 * factor)

    def test_params_blob_roundtrip(self):
        net = FeedForwardNet.new([3, 4, 1], rng=RngStream(2))
        restored = params_from_blob(params_to_blob(net.params))
        assert len(restored) == 4
        for a, b in zip(net.params, restored):
            assert np.array_equal(a, b)

    def test_params_blob_with_bad_data(self):
        with pytest.raises(DecodeError):
            params_from_blob(b"\xff\x00")
            pytest.fail("params_from_blob() should fail.")

    def test_params_blob_with_unknown_format(self):
        data = params_to_blob([np.zeros(1)]).replace(b"driftbench-params", b"driftbench-paramz")
        with pytest.raises(UnsupportedFormatError) as err:
            params_from_blob(data)
            pytest.fail("params_from_blob() should fail.")
        assert "Unknown checkpoint format: driftbench-paramz." in str(err.value)
