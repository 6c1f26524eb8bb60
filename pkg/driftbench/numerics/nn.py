import math
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np
import scipy.sparse as sp

from ..exceptions import SpecificationError, UsageError
from ..utils import check_finite
from .rng import RngStream

Batch = Union[np.ndarray, sp.spmatrix]


def as_tensor2(values, rows: Optional[int] = None, cols: Optional[int] = None) -> np.ndarray:
    """
    Returns ``values`` as a row-major float64 matrix, checking its shape and
    that every value is finite.
    """
    t = np.ascontiguousarray(values, dtype=np.float64)
    if t.ndim != 2:
        raise SpecificationError("tensor should be 2-dimensional.")
    if (rows is not None and t.shape[0] != rows) or (cols is not None and t.shape[1] != cols):
        raise SpecificationError(f"tensor shape should be ({rows}, {cols}), got {t.shape}.")
    return check_finite(t, "tensor")


class FeedForwardNet:
    """
    A fully connected network with rectifier activations and inverted dropout
    on every hidden layer and a linear output layer.

    ``widths`` lists the input width, the hidden widths and the output width.
    Parameters are kept as ``[W0, b0, W1, b1, ...]`` with ``Wl`` of shape
    ``(fan_in, fan_out)``. Inputs may be dense arrays or scipy sparse
    matrices; sparse inputs are multiplied without densifying.
    """

    def __init__(self, weights: Sequence[np.ndarray], biases: Sequence[np.ndarray], dropout: Union[float, Sequence[float]] = 0.0):
        if len(weights) == 0 or len(weights) != len(biases):
            raise SpecificationError("weights and biases should be non-empty and aligned.")
        self.weights = [np.array(w, dtype=np.float64) for w in weights]
        self.biases = [np.array(b, dtype=np.float64).reshape(-1) for b in biases]
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            if w.ndim != 2 or b.size != w.shape[1]:
                raise SpecificationError(f"layer {i} weight/bias shapes do not match.")
            if i > 0 and self.weights[i - 1].shape[1] != w.shape[0]:
                raise SpecificationError(f"layer {i} input width does not chain.")
        n_hidden = len(self.weights) - 1
        rates = [float(dropout)] * n_hidden if isinstance(dropout, (int, float)) else [float(r) for r in dropout]
        if len(rates) != n_hidden:
            raise SpecificationError("dropout should have one rate per hidden layer.")
        if any(r < 0.0 or r >= 1.0 for r in rates):
            raise SpecificationError("dropout should be in [0, 1).")
        self.dropout = rates
        self._cache: Optional[dict] = None

    @classmethod
    def new(cls, widths: Sequence[int], dropout: Union[float, Sequence[float]] = 0.0, rng: Optional[RngStream] = None):
        """
        Creates a network with weights and biases drawn from
        ``uniform(-sqrt(1/fan_in), sqrt(1/fan_in))``; zeros without ``rng``.

        Args:
            widths (Sequence[int]): ``[input, hidden..., output]`` widths.
            dropout (Union[float, Sequence[float]]): Dropout rate of every
                hidden layer, or one rate per hidden layer.
            rng (Optional[RngStream]): The initialization stream.
        Returns:
            FeedForwardNet: A new network.
        Raises:
            SpecificationError: Invalid widths or dropout.
        """
        if len(widths) < 2 or any(not isinstance(w, (int, np.integer)) or w <= 0 for w in widths):
            raise SpecificationError("widths should be at least two positive ints.")
        weights = []
        biases = []
        for fan_in, fan_out in zip(widths[:-1], widths[1:]):
            if rng is None:
                weights.append(np.zeros((fan_in, fan_out)))
                biases.append(np.zeros(fan_out))
                continue
            bound = math.sqrt(1.0 / fan_in)
            weights.append(rng.uniform(-bound, bound, (fan_in, fan_out)))
            biases.append(rng.uniform(-bound, bound, fan_out))
        return cls(weights, biases, dropout)

    @property
    def widths(self) -> List[int]:
        return [self.weights[0].shape[0]] + [w.shape[1] for w in self.weights]

    @property
    def params(self) -> List[np.ndarray]:
        res = []
        for w, b in zip(self.weights, self.biases):
            res.extend([w, b])
        return res

    def set_params(self, params: Sequence[np.ndarray]) -> None:
        if len(params) != 2 * len(self.weights):
            raise SpecificationError("params should hold one weight and one bias per layer.")
        for i in range(len(self.weights)):
            w = np.array(params[2 * i], dtype=np.float64)
            b = np.array(params[2 * i + 1], dtype=np.float64).reshape(-1)
            if w.shape != self.weights[i].shape or b.shape != self.biases[i].shape:
                raise SpecificationError(f"layer {i} parameter shapes do not match.")
            self.weights[i] = w
            self.biases[i] = b
        self._cache = None

    def copy(self) -> "FeedForwardNet":
        return FeedForwardNet(self.weights, self.biases, self.dropout)

    def forward(self, batch: Batch, mode: str = "eval", rng: Optional[RngStream] = None) -> Tuple[List[np.ndarray], np.ndarray]:
        """
        Runs the network on a batch.

        Args:
            batch (Batch): A ``(rows, input width)`` dense or sparse matrix.
            mode (str): ``"train"`` applies dropout and records the pass for
                :meth:`backward`; ``"eval"`` is deterministic.
            rng (Optional[RngStream]): Dropout stream, required in train mode
                when any dropout rate is positive.
        Returns:
            Tuple[List[np.ndarray], np.ndarray]: The hidden activations and
            the ``(rows, output width)`` output.
        Raises:
            SpecificationError: Shape mismatch or unknown mode.
            UsageError: Missing dropout stream.
            NumericError: Non-finite output.
        """
        if mode not in ("train", "eval"):
            raise SpecificationError(f"Unknown mode: {mode}.")
        if batch.ndim != 2 or batch.shape[1] != self.weights[0].shape[0]:
            raise SpecificationError(
                f"batch should have {self.weights[0].shape[0]} columns, got {batch.shape}."
            )
        train = mode == "train"
        if train and rng is None and any(r > 0.0 for r in self.dropout):
            raise UsageError("rng is required in train mode with dropout.")
        x: Batch = batch if sp.issparse(batch) else as_tensor2(batch)
        inputs: List[Batch] = []
        pre: List[np.ndarray] = []
        drops: List[Optional[np.ndarray]] = []
        activations: List[np.ndarray] = []
        last = len(self.weights) - 1
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            inputs.append(x)
            z = np.asarray(x @ w) + b
            if i == last:
                x = z
                break
            pre.append(z)
            h = np.maximum(z, 0.0)
            mask = None
            if train and self.dropout[i] > 0.0:
                keep = 1.0 - self.dropout[i]
                mask = (rng.random(h.shape) < keep) / keep  # type: ignore[union-attr]
                h = h * mask
            drops.append(mask)
            activations.append(h)
            x = h
        out = check_finite(np.asarray(x), "network output")
        self._cache = {"inputs": inputs, "pre": pre, "drops": drops} if train else None
        return activations, out

    def backward(self, grad_out: np.ndarray) -> Tuple[List[np.ndarray], Optional[np.ndarray]]:
        """
        Backpropagates the loss gradient at the output through the pass
        recorded by the last train-mode :meth:`forward`.

        Args:
            grad_out (np.ndarray): ``dLoss/dOutput`` of shape
                ``(rows, output width)``.
        Returns:
            Tuple[List[np.ndarray], Optional[np.ndarray]]: Parameter gradients
            in :attr:`params` order and ``dLoss/dInput`` (None for sparse
            inputs).
        Raises:
            UsageError: No recorded forward pass.
        """
        if self._cache is None:
            raise UsageError("backward should follow a train-mode forward.")
        cache, self._cache = self._cache, None
        inputs = cache["inputs"]
        g = np.asarray(grad_out, dtype=np.float64)
        if g.ndim == 1:
            g = g.reshape(-1, 1)
        rows = inputs[0].shape[0]
        if g.shape != (rows, self.weights[-1].shape[1]):
            raise SpecificationError("grad_out shape does not match the network output.")
        grads: List[np.ndarray] = [np.empty(0)] * (2 * len(self.weights))
        for i in range(len(self.weights) - 1, -1, -1):
            if i < len(self.weights) - 1:
                if cache["drops"][i] is not None:
                    g = g * cache["drops"][i]
                g = g * (cache["pre"][i] > 0.0)
            x = inputs[i]
            grads[2 * i] = np.asarray(x.T @ g)
            grads[2 * i + 1] = g.sum(axis=0)
            if i > 0 or not sp.issparse(x):
                g = g @ self.weights[i].T
        input_grad = None if sp.issparse(inputs[0]) else g
        return grads, input_grad
