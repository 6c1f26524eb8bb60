import logging
import os
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple, Union

import numpy as np
import pandas as pd

from .const import (
    ACTIVE_SETTINGS,
    AL_SELECTORS,
    DEFAULT_MARGIN,
    DEFAULT_PSEUDO_LOSS_NEIGHBORS,
    DEFAULT_XENT_LAMBDA,
    MALWARE,
    MODEL_KINDS_NEURAL,
)
from .dataset import Dataset, SplitDataset
from .dedup import annotate
from .evaluation import RunReport, month_metrics
from .exceptions import DriftBenchError, RunError, SelectionError, SpecificationError
from .losses import bce_terms, hcc_anchor_loss
from .model import Model
from .model_interface import ModelInterface
from .model_spec import ModelSpec
from .utils import derive_seed

logger = logging.getLogger(__name__)

EVENT_PHASES = ["evaluated", "selected", "retrained", "skipped"]


@dataclass
class ALConfig:
    """
    Active learning settings.

    Attributes:
        budget (int): Labels revealed per month.
        selector (str): ``uncertainty`` or ``pseudo_loss`` (HCC only).
        merged_start (bool): Fit first on train and the fully labeled
            validation months and evaluate the test months only; otherwise
            fit on train and run the loop over validation and test months.
        k (int): Pool neighbors of the pseudo-loss selector.
        retrain_last_month (bool): Retrain after the final evaluated month.
        reuse_annotations (bool): Give a selected sample whose feature vector
            was annotated before its earlier label at no budget cost.
    """

    budget: int
    selector: str = "uncertainty"
    merged_start: bool = False
    k: int = DEFAULT_PSEUDO_LOSS_NEIGHBORS
    retrain_last_month: bool = True
    reuse_annotations: bool = False

    def __post_init__(self):
        if not isinstance(self.budget, int) or isinstance(self.budget, bool) or self.budget < 0:
            raise SpecificationError("budget should be non-negative int.")
        if self.selector not in AL_SELECTORS:
            raise SpecificationError(f"Unknown selector: {self.selector}.")
        if not isinstance(self.k, int) or self.k < 1:
            raise SpecificationError("k should be positive int.")

    @property
    def setting(self) -> str:
        return ACTIVE_SETTINGS[0] if self.merged_start else ACTIVE_SETTINGS[1]

    def check_kind(self, kind: str) -> None:
        if self.selector == "pseudo_loss" and kind != "HCC":
            raise SpecificationError("pseudo_loss selector should be used with HCC.")


@dataclass
class ALState:
    """
    The state of an active learning run: the current model, the labeled pool
    (with the month each pool sample was revealed, ``""`` for the initial
    pool) and the ordered event log.
    """

    model: ModelInterface
    pool: Dataset
    revealed: List[str]
    events: List[Tuple[str, str, str]] = field(default_factory=list)
    charged: Dict[str, int] = field(default_factory=dict)

    def log(self, month: str, phase: str, detail: str = "") -> None:
        self.events.append((month, phase, detail))

    def annotations_per_month(self) -> Dict[str, int]:
        """
        Returns the budget charged for every evaluated month.
        """
        return dict(self.charged)

    def check_temporal_hygiene(self) -> bool:
        """
        Audits the event log: every month runs evaluated, selected and then
        retrained or skipped, and no month's labels reach a model before that
        month is evaluated.
        """
        seen: List[str] = []
        trained_on: set = set()
        revealed: set = set()
        phase_of: Dict[str, List[str]] = {}
        for month, phase, _ in self.events:
            phase_of.setdefault(month, []).append(phase)
            if phase == "evaluated":
                if month in trained_on or month in revealed or month in seen:
                    return False
                seen.append(month)
            elif phase == "selected":
                revealed.add(month)
            elif phase == "retrained":
                trained_on |= revealed
        for month, phases in phase_of.items():
            if phases[:2] != ["evaluated", "selected"] or len(phases) != 3:
                return False
            if phases[2] not in ("retrained", "skipped"):
                return False
        return True

    def event_frame(self) -> pd.DataFrame:
        return pd.DataFrame(self.events, columns=["month", "phase", "detail"])

    def write_events(self, path: Union[str, os.PathLike]) -> str:
        path = os.fspath(path)
        self.event_frame().to_csv(path, index=False, lineterminator="\n")
        return path


def _rank_uncertain(model: ModelInterface, samples: Dataset) -> np.ndarray:
    scores = model.uncertainty(samples)
    return np.argsort(-scores, kind="stable")


def _anchor_families(anchor_labels: np.ndarray, labels: np.ndarray, families: np.ndarray) -> np.ndarray:
    # Pseudo family: that of the nearest malware neighbor.
    malware = labels == MALWARE
    first = np.argmax(malware, axis=1)
    nearest = families[np.arange(labels.shape[0]), first]
    return np.where((anchor_labels == MALWARE) & malware.any(axis=1), nearest, -1)


def _pseudo_losses(
    model: ModelInterface, samples: Dataset, pool: Dataset, k: int
) -> np.ndarray:
    spec = model.spec
    lam = spec.get("xent_lambda", DEFAULT_XENT_LAMBDA)
    margin = spec.get("margin", DEFAULT_MARGIN)
    p = model.predict_proba(samples)
    pseudo = (p > 0.5).astype(np.int64)
    emb = model.embed(samples)
    pool_emb = model.embed(pool)
    k = min(k, len(pool))
    pool_sq = np.einsum("ij,ij->i", pool_emb, pool_emb)
    res = np.zeros(len(samples))
    for start in range(0, len(samples), 1024):
        a = emb[start : start + 1024]
        d2 = np.einsum("ij,ij->i", a, a)[:, None] - 2.0 * a @ pool_emb.T + pool_sq[None, :]
        nearest = np.argsort(d2, axis=1, kind="stable")[:, :k]
        labels = pool.labels[nearest]
        families = pool.families[nearest]
        anchor_labels = pseudo[start : start + 1024]
        contrastive = hcc_anchor_loss(
            a,
            anchor_labels,
            _anchor_families(anchor_labels, labels, families),
            pool_emb[nearest],
            labels,
            families,
            margin,
        )
        res[start : start + 1024] = contrastive
    return res + lam * bce_terms(p, pseudo)


def _rank_pseudo_loss(model: ModelInterface, samples: Dataset, pool: Dataset, k: int) -> np.ndarray:
    if model.kind != "HCC":
        raise SpecificationError("pseudo_loss selector should be used with HCC.")
    if len(pool) == 0:
        raise SelectionError("pseudo_loss selector needs a non-empty labeled pool.")
    if k < 1:
        raise SpecificationError("k should be positive int.")
    if len(samples) == 0:
        return np.zeros(0, dtype=np.int64)
    return np.argsort(-_pseudo_losses(model, samples, pool, k), kind="stable")


def _check_budget(budget: int) -> None:
    if not isinstance(budget, (int, np.integer)) or budget < 0:
        raise SpecificationError("budget should be non-negative int.")


def select_uncertain(model: ModelInterface, samples: Dataset, budget: int) -> np.ndarray:
    """
    Returns the positions of the ``budget`` samples with the largest
    uncertainty, most uncertain first; ties go to the lower position.
    """
    _check_budget(budget)
    if budget == 0 or len(samples) == 0:
        return np.zeros(0, dtype=np.int64)
    return _rank_uncertain(model, samples)[:budget]


def select_pseudo_loss(
    model: ModelInterface,
    samples: Dataset,
    pool: Dataset,
    budget: int,
    k: int = DEFAULT_PSEUDO_LOSS_NEIGHBORS,
) -> np.ndarray:
    """
    Ranks samples by their pseudo-loss and returns the top ``budget``
    positions.

    A sample's pseudo label is its predicted label. Its pseudo-loss is the
    hierarchical contrastive loss of its embedding against its ``k`` nearest
    pool embeddings (Euclidean) under the pseudo label, plus
    ``xent_lambda`` times its cross-entropy under the pseudo label. A
    sample pseudo-labeled malware takes the family of its nearest malware
    neighbor, so same-family neighbors enter the family term.

    Args:
        model (ModelInterface): A fitted HCC model.
        samples (Dataset): The month's samples.
        pool (Dataset): The labeled pool.
        budget (int): Samples to select.
        k (int): Pool neighbors per sample.
    Returns:
        np.ndarray: Selected positions, highest loss first.
    Raises:
        SelectionError: Empty pool.
        SpecificationError: Not an HCC model or invalid arguments.
    """
    _check_budget(budget)
    ranking = _rank_pseudo_loss(model, samples, pool, k)
    return ranking[:budget]


def _with_labels(data: Dataset, labels: np.ndarray) -> Dataset:
    families = np.where(labels == data.labels, data.families, -1)
    return Dataset(
        data.dimension,
        data.months,
        data.indptr,
        data.indices,
        labels,
        families,
        data.month_index,
        name=data.name,
        family_names=data.family_names,
    )


def _retrain(
    model: ModelInterface, spec: ModelSpec, pool: Dataset, seed: int, month: str, jobs: int
) -> Tuple[ModelInterface, str]:
    if spec.kind in MODEL_KINDS_NEURAL:
        return model.fine_tune(pool, derive_seed(seed, f"fine-tune-{month}"), spec), "fine_tune"
    return Model.fit(spec, pool, seed, jobs), "scratch"


def run_active_learning(
    split: SplitDataset, spec: ModelSpec, config: ALConfig, seed: int = 0, jobs: int = 1
) -> Tuple[ALState, RunReport]:
    """
    Runs the monthly evaluate, annotate and retrain loop.

    For every evaluated month in order the current model is evaluated on the
    month, up to ``budget`` of its samples are selected and their labels are
    added to the pool, and the model is retrained: RF, SVM and GBT refit on
    the whole pool, MLP, SCC and HCC are fine-tuned on it. Retraining is
    skipped when no label was revealed.

    Args:
        split (SplitDataset): The split dataset, deduplicated in active mode.
        spec (ModelSpec): The model spec.
        config (ALConfig): The loop settings.
        seed (int): The run seed.
        jobs (int): Parallel workers for scratch refits.
    Returns:
        Tuple[ALState, RunReport]: The final state and the per-month report.
    Raises:
        SpecificationError: Invalid arguments.
        RunError: A failure inside the loop, with its month.
    """
    config.check_kind(spec.kind)
    if split.mode != "active":
        annotated = annotate(split, "active")
        n_dupes = sum(int(np.count_nonzero(~a.unique_mask())) for a in annotated.annotations.values())
        if n_dupes > 0:
            logger.warning("Active learning input holds %d duplicated samples.", n_dupes)

    if config.merged_start and len(split.validation) > 0:
        pool = Dataset.concat([split.train, split.validation])
        stream = split.test
    else:
        pool = split.train
        stream = Dataset.concat([split.validation, split.test]) if not config.merged_start else split.test
    if len(stream) == 0:
        raise SpecificationError("active learning needs at least one evaluated sample.")

    logger.info(
        "Active %s run of %s (seed %d, budget %d, selector %s).",
        config.setting,
        spec.kind,
        seed,
        config.budget,
        config.selector,
    )
    state = ALState(Model.fit(spec, pool, seed, jobs), pool, [""] * len(pool))
    known: Dict[bytes, int] = {}
    if config.reuse_annotations:
        known = {key: int(y) for key, y in zip(pool.keys(), pool.labels)}

    counts = stream.month_counts()
    evaluated = [m for pos, m in enumerate(stream.months) if counts[pos] > 0]
    metrics = []
    for month in evaluated:
        try:
            part = stream.month_slice(month)
            metrics.append(month_metrics(state.model.predict_proba(part), part.labels, month))
            state.log(month, "evaluated", f"f1={metrics[-1].f1:.6f}")

            if config.selector == "pseudo_loss":
                ranking = _rank_pseudo_loss(state.model, part, state.pool, config.k)
            else:
                ranking = _rank_uncertain(state.model, part)
            chosen: List[int] = []
            labels = part.labels.copy()
            reused = 0
            part_keys = part.keys() if config.reuse_annotations else []
            for pos in ranking:
                if len(chosen) - reused >= config.budget:
                    break
                if config.reuse_annotations and part_keys[pos] in known:
                    labels[pos] = known[part_keys[pos]]
                    reused += 1
                chosen.append(int(pos))
            charged = len(chosen) - reused
            state.charged[month] = charged
            if config.reuse_annotations:
                for pos in chosen:
                    known.setdefault(part_keys[pos], int(labels[pos]))
            if chosen:
                picked = np.array(sorted(chosen), dtype=np.int64)
                new = _with_labels(part, labels).subset(picked)
                state.pool = Dataset.concat([state.pool, new])
                state.revealed.extend([month] * len(new))
            state.log(month, "selected", f"n={charged} reused={reused}")

            if month == evaluated[-1] and not config.retrain_last_month:
                state.log(month, "skipped", "last month")
            elif not chosen:
                logger.warning("No labels revealed in %s; retraining skipped.", month)
                state.log(month, "skipped", "no new labels")
            else:
                state.model, how = _retrain(state.model, spec, state.pool, seed, month, jobs)
                state.log(month, "retrained", f"pool={len(state.pool)} mode={how}")
            logger.info("Month %s: f1 %.4f, %d labels charged.", month, metrics[-1].f1, charged)
        except DriftBenchError as err:
            raise RunError(f"month {month}: {err}") from err

    report = RunReport(
        metrics,
        model=spec.kind,
        seed=seed,
        setting=f"active-{config.setting}",
        metadata={"budget": config.budget, "selector": config.selector},
    )
    return state, report
