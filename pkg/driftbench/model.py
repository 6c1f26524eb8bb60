from typing import Any, Dict, Optional

import numpy as np

from .algs.gbt import GradientBoostedTrees
from .algs.neural import HCCClassifier, MLPClassifier, SCCClassifier
from .algs.rf import RandomForest
from .algs.svm import LinearSVM
from .cbor_processor import CBORProcessor
from .const import CHECKPOINT_FORMAT, CHECKPOINT_VERSION
from .dataset import Dataset
from .exceptions import DecodeError, SpecificationError
from .model_interface import FeatureInput, ModelInterface
from .model_spec import ModelSpec
from .search_space import Constant, SearchSpace

_MODELS = {
    "RF": RandomForest,
    "SVM": LinearSVM,
    "GBT": GradientBoostedTrees,
    "MLP": MLPClassifier,
    "SCC": SCCClassifier,
    "HCC": HCCClassifier,
}


class Model(CBORProcessor):
    """
    A :class:`ModelInterface <driftbench.ModelInterface>` Builder.
    """

    @staticmethod
    def new(spec: ModelSpec) -> ModelInterface:
        """
        Creates an unfitted model for a spec.

        Args:
            spec (ModelSpec): A validated model spec.
        Returns:
            ModelInterface: A model object.
        Raises:
            SpecificationError: Invalid arguments.
        """
        if not isinstance(spec, ModelSpec):
            raise SpecificationError("spec should be ModelSpec.")
        if spec.kind not in _MODELS:
            raise SpecificationError(f"Unsupported or unknown model kind: {spec.kind}.")
        return _MODELS[spec.kind](spec)

    @staticmethod
    def fit(spec: ModelSpec, data: Dataset, seed: int = 0, jobs: int = 1) -> ModelInterface:
        """
        Creates a model for ``spec`` and fits it on ``data``.

        Args:
            spec (ModelSpec): A validated model spec.
            data (Dataset): Labeled training samples.
            seed (int): The run seed.
            jobs (int): Parallel workers; results do not depend on it.
        Returns:
            ModelInterface: The fitted model.
        Raises:
            SpecificationError: Invalid arguments.
            TrainingError: Unusable training data.
        """
        if not isinstance(jobs, int) or isinstance(jobs, bool) or jobs < 1:
            raise SpecificationError("jobs should be positive int.")
        model = Model.new(spec)
        model.jobs = jobs
        return model.fit(data, seed)

    @classmethod
    def from_bytes(cls, data: bytes) -> ModelInterface:
        """
        Restores a model from a checkpoint made by ``to_bytes``. The stored
        hyperparameters are trusted as they are, so checkpoints of models
        built on custom search spaces load as well.

        Args:
            data (bytes): A CBOR checkpoint.
        Returns:
            ModelInterface: The restored model.
        Raises:
            DecodeError: Failed to decode the checkpoint.
            UnsupportedFormatError: Unknown format tag or version.
        """
        doc: Dict[str, Any] = cls()._loads(data)
        cls()._validate_header(doc, CHECKPOINT_FORMAT, CHECKPOINT_VERSION)
        kind = doc.get("kind")
        params = doc.get("params")
        if kind not in _MODELS:
            raise DecodeError(f"Unsupported or unknown model kind: {kind}.")
        if not isinstance(params, dict):
            raise DecodeError("params should be map.")
        try:
            table = SearchSpace.table(kind)
            space = table.override(**{k: Constant(v) for k, v in params.items()})
            model = _MODELS[kind](ModelSpec.new(kind, params, space))
            model._load(doc)
        except SpecificationError as err:
            raise DecodeError("Failed to restore the model.") from err
        return model


def fit(spec: ModelSpec, data: Dataset, seed: int = 0, jobs: int = 1) -> ModelInterface:
    return Model.fit(spec, data, seed, jobs)


def predict_proba(model: ModelInterface, features: FeatureInput) -> np.ndarray:
    return model.predict_proba(features)


def predict(model: ModelInterface, features: FeatureInput) -> np.ndarray:
    return model.predict(features)


def uncertainty(model: ModelInterface, features: FeatureInput) -> np.ndarray:
    return model.uncertainty(features)


def fine_tune(
    model: ModelInterface,
    pool: Dataset,
    spec: Optional[ModelSpec] = None,
    seed: int = 0,
    epochs: Optional[int] = None,
) -> ModelInterface:
    """
    Continues training a neural model on a labeled pool and returns the tuned
    copy.

    Raises:
        UnsupportedOperationError: ``model`` is RF, SVM or GBT.
    """
    return model.fine_tune(pool, seed, spec, epochs)


def feature_importance(model: ModelInterface) -> np.ndarray:
    return model.feature_importance()
