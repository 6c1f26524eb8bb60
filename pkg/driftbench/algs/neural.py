import logging
import math
from typing import Any, Dict, Iterator, List, Optional, Tuple

import numpy as np
import scipy.sparse as sp

from ..const import BENIGN, MALWARE
from ..dataset import Dataset
from ..exceptions import DecodeError, SpecificationError, TrainingError
from ..losses import bce_loss, build_pair_sets, combined_loss, hcc_loss, mine_triplets, triplet_loss
from ..model_interface import ModelInterface
from ..model_spec import ModelSpec
from ..numerics.blob import params_from_blob, params_to_blob
from ..numerics.nn import FeedForwardNet
from ..numerics.optim import OptimizerState, StepSchedule
from ..numerics.rng import RngStream
from ..samplers import half_sampler
from ..utils import sigmoid

logger = logging.getLogger(__name__)


def _net_from_blob(data: Any, dropout: float) -> Optional[FeedForwardNet]:
    if data is None:
        return None
    params = params_from_blob(data)
    return FeedForwardNet(params[0::2], params[1::2], dropout)


class NeuralModel(ModelInterface):
    """
    Base class of the network classifiers: a classification head, optionally
    on top of an encoder, trained by mini-batch gradient descent on the
    binary cross-entropy of the sigmoid output.
    """

    uses_encoder = False

    def __init__(self, spec: ModelSpec):
        super().__init__(spec)
        self._encoder: Optional[FeedForwardNet] = None
        self._head: Optional[FeedForwardNet] = None
        self._optimizer: Optional[OptimizerState] = None

    @property
    def head(self) -> Optional[FeedForwardNet]:
        return self._head

    @property
    def encoder(self) -> Optional[FeedForwardNet]:
        return self._encoder

    @property
    def optimizer(self) -> Optional[OptimizerState]:
        return self._optimizer

    def parameters(self) -> List[np.ndarray]:
        enc = self._encoder.params if self._encoder is not None else []
        return enc + self._head.params if self._head is not None else enc

    def fit(self, data: Dataset, seed: int = 0) -> "NeuralModel":
        self._start_fit(data, seed)
        self._check_data(data)
        rng = RngStream(seed).child(self.kind)
        dropout = self._spec["dropout"]
        if self.uses_encoder:
            enc_widths = [data.dimension] + list(self._spec["encoder_layers"])
            self._encoder = FeedForwardNet.new(enc_widths, dropout, rng.child("encoder"))
            head_in = enc_widths[-1]
        else:
            head_in = data.dimension
        self._head = FeedForwardNet.new(
            [head_in] + list(self._spec["mlp_layers"]) + [1], dropout, rng.child("head")
        )
        self._optimizer = OptimizerState(self._spec["optimizer"], self._spec["lr"])
        epochs = self._spec["epochs"]
        self._train(data, epochs, rng.child("train"), self._schedule())
        self.metadata["epochs_run"] = epochs
        self.metadata["total_epochs"] = epochs
        self.metadata["balance"] = bool(self._spec.get("balance", False))
        return self

    def fine_tune(
        self,
        pool: Dataset,
        seed: int = 0,
        spec: Optional[ModelSpec] = None,
        epochs: Optional[int] = None,
    ) -> "NeuralModel":
        """
        Continues training on ``pool`` from the current weights and returns
        the tuned copy.

        Args:
            pool (Dataset): The labeled pool.
            seed (int): The run seed.
            spec (Optional[ModelSpec]): Supplies the continued-learning
                hyperparameters; the model's own spec when omitted.
            epochs (Optional[int]): Explicit epoch count overriding the
                continued-learning setting; 0 leaves the weights unchanged.
        Returns:
            NeuralModel: The fine-tuned model.
        Raises:
            SpecificationError: Mismatching kind, dimension or epochs.
            TrainingError: Unusable pool.
        """
        self._check_fitted()
        spec = spec or self._spec
        if spec.kind != self.kind:
            raise SpecificationError(f"spec should be for {self.kind}.")
        n_epochs = self._continued_epochs(spec) if epochs is None else epochs
        if not isinstance(n_epochs, int) or n_epochs < 0:
            raise SpecificationError("epochs should be non-negative int.")
        tuned = self.copy()
        tuned.metadata["epochs_run"] = n_epochs
        if n_epochs == 0:
            return tuned
        if pool.dimension != self._dimension:
            raise SpecificationError(f"pool dimension should be {self._dimension}.")
        n_benign, n_malware = pool.class_counts()
        if n_benign == 0 or n_malware == 0:
            raise TrainingError(f"{self.kind} needs samples of both classes.")
        tuned._check_data(pool)
        tuned._restart_optimizer(spec)
        tuned._train(pool, n_epochs, RngStream(seed).child(f"{self.kind}-fine-tune"), None)
        tuned.metadata["total_epochs"] = tuned.metadata.get("total_epochs", 0) + n_epochs
        tuned.metadata["fine_tunes"] = tuned.metadata.get("fine_tunes", 0) + 1
        return tuned

    def embed(self, features) -> np.ndarray:
        if not self.uses_encoder:
            return super().embed(features)
        x = self._as_matrix(features)
        return self._encoder.forward(x, "eval")[1]  # type: ignore[union-attr]

    def _continued_epochs(self, spec: ModelSpec) -> int:
        return int(math.floor(spec["cont_learning_epochs"] * spec["epochs"] + 0.5))

    def _restart_optimizer(self, spec: ModelSpec) -> None:
        pass

    def _schedule(self) -> Optional[StepSchedule]:
        return None

    def _check_data(self, data: Dataset) -> None:
        pass

    def _batches(self, data: Dataset, rng: RngStream) -> Iterator[np.ndarray]:
        batch_size = self._spec["batch_size"]
        if self._spec.get("balance", False):
            return self._balanced_batches(data.labels, batch_size, rng)
        perm = rng.permutation(len(data))
        return (perm[i : i + batch_size] for i in range(0, len(data), batch_size))

    @staticmethod
    def _balanced_batches(labels: np.ndarray, batch_size: int, rng: RngStream) -> Iterator[np.ndarray]:
        benign = np.flatnonzero(labels == BENIGN)
        malware = np.flatnonzero(labels == MALWARE)
        major, minor = (benign, malware) if benign.size >= malware.size else (malware, benign)
        half = max(1, batch_size // 2)
        perm = major[rng.permutation(major.size)]
        for i in range(0, perm.size, half):
            part = perm[i : i + half]
            yield np.concatenate([part, rng.choice(minor, size=part.size, replace=True)])

    def _train(self, data: Dataset, epochs: int, rng: RngStream, schedule: Optional[StepSchedule]) -> None:
        x = data.to_csr()
        y = data.labels.astype(np.float64)
        fam = data.families
        base_lr = self._optimizer.lr  # type: ignore[union-attr]
        for epoch in range(epochs):
            if schedule is not None:
                self._optimizer.lr = schedule.lr(epoch, base_lr)  # type: ignore[union-attr]
            erng = rng.child(f"epoch-{epoch}")
            losses = []
            for rows in self._batches(data, erng):
                if rows.size == 0:
                    continue
                losses.append(self._step(x[rows], y[rows], fam[rows], erng))
            logger.debug("%s epoch %d: loss %.6f", self.kind, epoch, float(np.mean(losses)) if losses else 0.0)
        if schedule is not None:
            self._optimizer.lr = base_lr  # type: ignore[union-attr]

    def _step(self, xb: sp.csr_matrix, yb: np.ndarray, fb: np.ndarray, rng: RngStream) -> float:
        head = self._head
        _, out = head.forward(xb, "train", rng)  # type: ignore[union-attr]
        loss, dz = bce_loss(sigmoid(out[:, 0]), yb)
        grads, _ = head.backward(dz[:, None])  # type: ignore[union-attr]
        self._optimizer.step(head.params, grads)  # type: ignore[union-attr]
        return loss

    def _predict_proba(self, x: sp.csr_matrix) -> np.ndarray:
        h = x
        if self._encoder is not None:
            h = self._encoder.forward(x, "eval")[1]
        return sigmoid(self._head.forward(h, "eval")[1][:, 0])  # type: ignore[union-attr]

    def _state_to_cbor(self) -> Dict[str, Any]:
        opt = self._optimizer
        return {
            "encoder": None if self._encoder is None else params_to_blob(self._encoder.params),
            "head": params_to_blob(self._head.params),  # type: ignore[union-attr]
            "optimizer": {
                "kind": opt.kind,  # type: ignore[union-attr]
                "lr": opt.lr,  # type: ignore[union-attr]
                "t": opt.t,  # type: ignore[union-attr]
                "m": None if opt.m is None else params_to_blob(opt.m),  # type: ignore[union-attr]
                "v": None if opt.v is None else params_to_blob(opt.v),  # type: ignore[union-attr]
            },
        }

    def _state_from_cbor(self, state: Any) -> None:
        if not isinstance(state, dict) or "head" not in state or "optimizer" not in state:
            raise DecodeError("network state should hold head and optimizer.")
        dropout = self._spec["dropout"]
        self._encoder = _net_from_blob(state.get("encoder"), dropout)
        self._head = _net_from_blob(state["head"], dropout)
        if self.uses_encoder != (self._encoder is not None):
            raise DecodeError(f"{self.kind} state has an unexpected encoder layout.")
        opt = state["optimizer"]
        if not isinstance(opt, dict):
            raise DecodeError("optimizer state should be map.")
        self._optimizer = OptimizerState(
            opt.get("kind"),
            opt.get("lr"),
            None if opt.get("m") is None else params_from_blob(opt["m"]),
            None if opt.get("v") is None else params_from_blob(opt["v"]),
            int(opt.get("t", 0)),
        )


class MLPClassifier(NeuralModel):
    """
    Feed-forward classifier trained with Adam on binary cross-entropy; with
    ``balance`` every batch pairs majority-class samples with as many
    minority-class samples drawn with replacement.
    """


class _ContrastiveModel(NeuralModel):
    uses_encoder = True

    def _contrastive(self, emb: np.ndarray, yb: np.ndarray, fb: np.ndarray, rng: RngStream) -> Tuple[float, np.ndarray]:
        raise NotImplementedError

    def _step(self, xb: sp.csr_matrix, yb: np.ndarray, fb: np.ndarray, rng: RngStream) -> float:
        enc = self._encoder
        head = self._head
        lam = self._spec["xent_lambda"]
        _, emb = enc.forward(xb, "train", rng)  # type: ignore[union-attr]
        _, out = head.forward(emb, "train", rng)  # type: ignore[union-attr]
        bce, dz = bce_loss(sigmoid(out[:, 0]), yb)
        contrastive, d_emb = self._contrastive(emb, yb, fb, rng)
        head_grads, d_head_in = head.backward(lam * dz[:, None])  # type: ignore[union-attr]
        enc_grads, _ = enc.backward(d_emb + d_head_in)  # type: ignore[union-attr]
        self._optimizer.step(enc.params + head.params, enc_grads + head_grads)  # type: ignore[union-attr]
        return combined_loss(bce, contrastive, lam)


class SCCClassifier(_ContrastiveModel):
    """
    Encoder plus classification head trained on
    ``xent_lambda * BCE + triplet loss`` with in-batch uniform triplet mining
    over binary labels.
    """

    def _contrastive(self, emb, yb, fb, rng):
        return triplet_loss(emb, mine_triplets(yb, rng), self._spec["margin"])


class HCCClassifier(_ContrastiveModel):
    """
    Encoder plus classification head trained on
    ``xent_lambda * BCE + hierarchical contrastive loss`` over batches from
    :func:`half_sampler <driftbench.samplers.half_sampler>`. Requires malware
    family labels. With SGD the step schedule applies during the initial fit;
    fine-tuning restarts the optimizer at ``cont_learning_lr``.
    """

    def _check_data(self, data: Dataset) -> None:
        if not np.any(data.families >= 0):
            raise TrainingError("HCC requires malware family labels.")

    def _batches(self, data: Dataset, rng: RngStream) -> Iterator[np.ndarray]:
        return half_sampler(data, self._spec["batch_size"], rng)

    def _schedule(self) -> Optional[StepSchedule]:
        if self._spec["optimizer"] != "SGD":
            return None
        return StepSchedule(self._spec["scheduler_step"], self._spec["scheduler_gamma"])

    def _continued_epochs(self, spec: ModelSpec) -> int:
        return int(spec["cont_learning_epochs"])

    def _restart_optimizer(self, spec: ModelSpec) -> None:
        self._optimizer = OptimizerState(spec["optimizer"], spec["cont_learning_lr"])

    def _contrastive(self, emb, yb, fb, rng):
        return hcc_loss(emb, build_pair_sets(yb, fb), self._spec["margin"])
