import copy
import json
import os
from typing import Any, Dict, List, Mapping, Optional, Sequence, Union

from .const import (
    AL_SELECTORS,
    DEDUP_MODES,
    DEFAULT_OUTPUT_ROOT,
    DEFAULT_PSEUDO_LOSS_NEIGHBORS,
    DEFAULT_SEEDS,
    ENV_OUTPUT_ROOT,
    MODEL_KINDS,
    OFFLINE_SETTINGS,
)
from .exceptions import SpecificationError
from .model_spec import ModelSpec
from .utils import canonical_json, month_ordinal, sha256_hex

DEFAULTS: Dict[str, Any] = {
    "dataset": None,
    "dimension": None,
    "train_months": None,
    "val_months": None,
    "test_months": None,
    "split_counts": None,
    "dedup": "auto",
    "model": "GBT",
    "params": {},
    "setting": "merged",
    "seeds": list(DEFAULT_SEEDS),
    "budget": 50,
    "selector": "uncertainty",
    "k": DEFAULT_PSEUDO_LOSS_NEIGHBORS,
    "retrain_last_month": True,
    "reuse_annotations": False,
    "hpo_budget": 200,
    "al_budget": 50,
    "jobs": 1,
    "out": None,
}


def _is_int(v: Any) -> bool:
    return isinstance(v, int) and not isinstance(v, bool)


def _check_range(name: str, v: Any) -> None:
    if v is None:
        return
    if not isinstance(v, list) or len(v) != 2 or not all(isinstance(m, str) for m in v):
        raise SpecificationError(f"{name} should be [first, last] month labels or null.")
    if month_ordinal(v[1]) < month_ordinal(v[0]):
        raise SpecificationError(f"{name} should have first <= last.")


class ExperimentConfig:
    """
    The settings of an experiment: the dataset, its split and dedup mode, the
    model and its hyperparameters, the protocol setting, the seeds and the
    active learning and search budgets.
    """

    def __init__(self, values: Mapping[str, Any]):
        unknown = sorted(set(values) - set(DEFAULTS))
        if unknown:
            raise SpecificationError(f"Unknown config key: {unknown[0]}.")
        v = copy.deepcopy(DEFAULTS)
        v.update(copy.deepcopy(dict(values)))

        if v["dataset"] is not None and not isinstance(v["dataset"], str):
            raise SpecificationError("dataset should be str.")
        if v["dimension"] is not None and (not _is_int(v["dimension"]) or v["dimension"] <= 0):
            raise SpecificationError("dimension should be positive int.")
        for name in ("train_months", "val_months", "test_months"):
            _check_range(name, v[name])
        if v["split_counts"] is not None:
            sc = v["split_counts"]
            if not isinstance(sc, list) or len(sc) != 3 or not all(_is_int(c) and c >= 0 for c in sc):
                raise SpecificationError("split_counts should be [train, validation, test] month counts.")
        if v["dedup"] not in DEDUP_MODES + ["none", "auto"]:
            raise SpecificationError("dedup should be offline, active, none or auto.")
        if v["model"] not in MODEL_KINDS:
            raise SpecificationError(f"Unknown model kind: {v['model']}.")
        if not isinstance(v["params"], dict):
            raise SpecificationError("params should be dict.")
        if v["setting"] not in OFFLINE_SETTINGS:
            raise SpecificationError("setting should be merged or holdout.")
        if (
            not isinstance(v["seeds"], list)
            or not v["seeds"]
            or not all(_is_int(s) and s >= 0 for s in v["seeds"])
        ):
            raise SpecificationError("seeds should be a non-empty list of non-negative int.")
        for name in ("budget", "al_budget"):
            if not _is_int(v[name]) or v[name] < 0:
                raise SpecificationError(f"{name} should be non-negative int.")
        for name in ("k", "hpo_budget", "jobs"):
            if not _is_int(v[name]) or v[name] < 1:
                raise SpecificationError(f"{name} should be positive int.")
        if v["selector"] not in AL_SELECTORS:
            raise SpecificationError(f"Unknown selector: {v['selector']}.")
        for name in ("retrain_last_month", "reuse_annotations"):
            if not isinstance(v[name], bool):
                raise SpecificationError(f"{name} should be bool.")
        if v["out"] is not None and not isinstance(v["out"], str):
            raise SpecificationError("out should be str.")
        self._values = v
        return

    @classmethod
    def new(cls, values: Optional[Mapping[str, Any]] = None) -> "ExperimentConfig":
        return cls(values or {})

    @classmethod
    def from_json(cls, data: Union[str, bytes, Mapping[str, Any]]) -> "ExperimentConfig":
        """
        Creates a config from a JSON document or an already parsed dict.

        Raises:
            SpecificationError: Malformed JSON, unknown keys or invalid
                values.
        """
        if isinstance(data, (str, bytes)):
            try:
                data = json.loads(data)
            except ValueError as err:
                raise SpecificationError(f"config should be JSON: {err}.") from err
        if not isinstance(data, Mapping):
            raise SpecificationError("config should be a JSON object.")
        values = dict(data)
        # A best_spec.json fragment carries the model as {"model", "params"}.
        return cls(values)

    @classmethod
    def load(cls, path: Union[str, os.PathLike]) -> "ExperimentConfig":
        with open(path, "r", encoding="utf-8") as f:
            return cls.from_json(f.read())

    def with_overrides(self, assignments: Sequence[str]) -> "ExperimentConfig":
        """
        Applies ``key=value`` overrides. Values are parsed as JSON, falling
        back to plain strings; ``params.<name>`` sets one hyperparameter.
        """
        values = copy.deepcopy(self._values)
        for a in assignments:
            if "=" not in a:
                raise SpecificationError(f"override should be key=value, got {a}.")
            key, raw = a.split("=", 1)
            try:
                value = json.loads(raw)
            except ValueError:
                value = raw
            if key.startswith("params."):
                values["params"][key[len("params.") :]] = value
                continue
            if key not in DEFAULTS:
                raise SpecificationError(f"Unknown config key: {key}.")
            values[key] = value
        return ExperimentConfig(values)

    def __getitem__(self, key: str) -> Any:
        return self._values[key]

    def to_dict(self) -> Dict[str, Any]:
        return copy.deepcopy(self._values)

    def hash(self) -> str:
        """
        Returns the hex SHA-256 of the canonical JSON of the config.
        """
        return sha256_hex(canonical_json(self._values))

    def spec(self) -> ModelSpec:
        return ModelSpec.new(self._values["model"], self._values["params"])

    def dedup_mode(self, protocol: str) -> Optional[str]:
        """
        Returns the dedup mode of a protocol (``offline`` or ``active``):
        the configured mode, or the protocol's own mode for ``auto``.
        """
        mode = self._values["dedup"]
        if mode == "none":
            return None
        return protocol if mode == "auto" else mode

    def output_root(self, flag: Optional[str] = None) -> str:
        return flag or self._values["out"] or os.environ.get(ENV_OUTPUT_ROOT) or DEFAULT_OUTPUT_ROOT

    def seeds(self) -> List[int]:
        return list(self._values["seeds"])


def parse_seeds(text: str) -> List[int]:
    """
    Parses a comma separated seed list such as ``0,1,2``.
    """
    try:
        seeds = [int(s) for s in text.split(",") if s.strip() != ""]
    except ValueError as err:
        raise SpecificationError(f"seeds should be comma separated int, got {text}.") from err
    if not seeds or any(s < 0 for s in seeds):
        raise SpecificationError("seeds should be a non-empty list of non-negative int.")
    return seeds
