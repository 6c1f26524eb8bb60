import json
import logging
import os
from dataclasses import dataclass
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from joblib import Parallel, delayed

from .active_learning import ALConfig, run_active_learning
from .const import CSV_FLOAT_FORMAT
from .dataset import Dataset, SplitDataset
from .evaluation import RunReport, evaluate_months
from .exceptions import DriftBenchError, SearchError, SpecificationError
from .model import Model
from .model_spec import ModelSpec
from .numerics.rng import RngStream
from .search_space import LogUniform, SearchSpace, Uniform

logger = logging.getLogger(__name__)

TRIAL_COLUMNS = ["trial", "objective", "best_so_far", "params_json", "fpr", "fnr", "status"]


@dataclass
class Trial:
    """
    One evaluated hyperparameter draw. ``objective`` is the unweighted mean
    F1 over the validation months, None when the trial failed.
    """

    index: int
    spec: ModelSpec
    objective: Optional[float] = None
    fpr: Optional[float] = None
    fnr: Optional[float] = None
    status: str = "ok"
    error: str = ""

    @property
    def ok(self) -> bool:
        return self.status == "ok"


def sample_params(space: SearchSpace, rng: RngStream) -> ModelSpec:
    """
    Draws every hyperparameter of ``space`` independently and returns the
    spec, validated against the same space.
    """
    return ModelSpec.new(space.kind, space.sample(rng), space)


def _objective_offline(split: SplitDataset, spec: ModelSpec, seed: int) -> RunReport:
    model = Model.fit(spec, split.train, seed)
    return RunReport(evaluate_months(model, split.validation), model=spec.kind, seed=seed, setting="hpo-offline")


def _objective_active(split: SplitDataset, spec: ModelSpec, al_budget: int, seed: int) -> RunReport:
    tuning = SplitDataset(
        split.train,
        split.validation,
        Dataset.empty(split.dimension),
        mode=split.mode,
    )
    config = ALConfig(budget=al_budget, retrain_last_month=False)
    return run_active_learning(tuning, spec, config, seed)[1]


def _run_trial(
    index: int,
    split: SplitDataset,
    space: SearchSpace,
    seed: int,
    al_budget: Optional[int],
) -> Trial:
    spec = sample_params(space, RngStream(seed).child(f"trial-{index}"))
    try:
        if al_budget is None:
            report = _objective_offline(split, spec, seed)
        else:
            report = _objective_active(split, spec, al_budget, seed)
        if not report.months:
            raise SearchError("no validation month was evaluated.")
        objective = report.mean("f1")
        if not np.isfinite(objective):
            raise SearchError("objective is not finite.")
        return Trial(index, spec, objective, report.mean("fpr"), report.mean("fnr"))
    except (DriftBenchError, FloatingPointError) as err:
        logger.warning("Trial %d failed: %s", index, err)
        return Trial(index, spec, status="failed", error=str(err))


def _search(
    split: SplitDataset,
    kind: str,
    budget: int,
    seed: int,
    space: Optional[SearchSpace],
    al_budget: Optional[int],
    jobs: int,
) -> Tuple[ModelSpec, List[Trial]]:
    if not isinstance(budget, int) or budget < 1:
        raise SpecificationError("budget should be positive int.")
    if len(split.validation) == 0:
        raise SpecificationError("validation split should hold at least one sample.")
    space = space or SearchSpace.table(kind)
    if space.kind != kind:
        raise SpecificationError(f"space is for {space.kind}, not {kind}.")
    logger.info("Random search over %s: %d trials (seed %d).", kind, budget, seed)
    if jobs == 1:
        trials = [_run_trial(i, split, space, seed, al_budget) for i in range(budget)]
    else:
        trials = Parallel(n_jobs=jobs)(
            delayed(_run_trial)(i, split, space, seed, al_budget) for i in range(budget)
        )
    trials = sorted(trials, key=lambda t: t.index)
    done = [t for t in trials if t.ok]
    if not done:
        raise SearchError(f"all {budget} trials of {kind} failed.")
    best = max(done, key=lambda t: (t.objective, -t.index))
    logger.info("Best trial %d: objective %.6f.", best.index, best.objective)
    return best.spec, trials


def run_search_offline(
    split: SplitDataset,
    kind: str,
    budget: int,
    seed: int = 0,
    space: Optional[SearchSpace] = None,
    jobs: int = 1,
) -> Tuple[ModelSpec, List[Trial]]:
    """
    Random search fitting on train and scoring the mean F1 over the
    validation months.

    Args:
        split (SplitDataset): The split dataset.
        kind (str): The model kind.
        budget (int): The number of trials.
        seed (int): The search seed; trial ``i`` draws from its own child
            stream and every trial fits with this seed.
        space (Optional[SearchSpace]): The search space, the standard one of
            ``kind`` by default.
        jobs (int): Parallel trials.
    Returns:
        Tuple[ModelSpec, List[Trial]]: The best spec (ties to the lowest trial
        index) and the trial log.
    Raises:
        SpecificationError: Invalid arguments.
        SearchError: Every trial failed.
    """
    return _search(split, kind, budget, seed, space, None, jobs)


def run_search_active(
    split: SplitDataset,
    kind: str,
    budget: int,
    al_budget: int,
    seed: int = 0,
    space: Optional[SearchSpace] = None,
    jobs: int = 1,
) -> Tuple[ModelSpec, List[Trial]]:
    """
    Random search scoring each trial by the mean F1 of an active learning
    run over the validation months: fit on train, evaluate each validation
    month, annotate ``al_budget`` samples and retrain, except after the last
    validation month.
    """
    if not isinstance(al_budget, int) or al_budget < 0:
        raise SpecificationError("al_budget should be non-negative int.")
    return _search(split, kind, budget, seed, space, al_budget, jobs)


def trials_frame(trials: Sequence[Trial]) -> pd.DataFrame:
    """
    Returns the trial log with the running best objective.
    """
    rows = []
    best = np.nan
    for t in sorted(trials, key=lambda t: t.index):
        if t.ok and (np.isnan(best) or t.objective > best):
            best = t.objective
        rows.append(
            {
                "trial": t.index,
                "objective": t.objective if t.ok else np.nan,
                "best_so_far": best,
                "params_json": json.dumps(t.spec.params, sort_keys=True),
                "fpr": t.fpr if t.ok else np.nan,
                "fnr": t.fnr if t.ok else np.nan,
                "status": t.status,
            }
        )
    return pd.DataFrame(rows, columns=TRIAL_COLUMNS)


def _value_key(v: Any) -> str:
    return json.dumps(v, sort_keys=True)


def hyperparameter_influence(trials: Sequence[Trial]) -> pd.DataFrame:
    """
    Returns the mean objective per hyperparameter value over the successful
    trials. Continuous hyperparameters are binned into quartiles.

    Returns:
        pd.DataFrame: Columns ``param,value,mean_objective,count``.
    """
    done = [t for t in trials if t.ok]
    columns = ["param", "value", "mean_objective", "count"]
    if not done:
        return pd.DataFrame([], columns=columns)
    space = done[0].spec.space
    objectives = np.array([t.objective for t in done])
    frames = []
    for name in space.names():
        values = [t.spec[name] for t in done]
        dist = space.params[name]
        if isinstance(dist, (LogUniform, Uniform)) and len(set(values)) > 1:
            x = np.log10(values) if isinstance(dist, LogUniform) else np.asarray(values)
            bins = pd.qcut(x, 4, duplicates="drop")
            labels = [
                f"[{10 ** b.left:.3g}, {10 ** b.right:.3g}]" if isinstance(dist, LogUniform) else f"[{b.left:.3g}, {b.right:.3g}]"
                for b in bins
            ]
        else:
            labels = [_value_key(v) for v in values]
        df = pd.DataFrame({"value": labels, "objective": objectives})
        grouped = df.groupby("value", sort=True)["objective"].agg(["mean", "count"]).reset_index()
        grouped.insert(0, "param", name)
        frames.append(grouped.rename(columns={"mean": "mean_objective"}))
    return pd.concat(frames, ignore_index=True)[columns]


def write_search(
    best: ModelSpec, trials: Sequence[Trial], directory: Union[str, os.PathLike]
) -> List[str]:
    """
    Writes ``trials.csv``, ``best_spec.json`` and ``influence.csv``.
    """
    directory = os.fspath(directory)
    os.makedirs(directory, exist_ok=True)
    paths = [
        os.path.join(directory, "trials.csv"),
        os.path.join(directory, "best_spec.json"),
        os.path.join(directory, "influence.csv"),
    ]
    trials_frame(trials).to_csv(paths[0], index=False, float_format=CSV_FLOAT_FORMAT, lineterminator="\n")
    with open(paths[1], "w", encoding="utf-8", newline="\n") as f:
        json.dump(best.to_dict(), f, sort_keys=True, indent=2)
        f.write("\n")
    hyperparameter_influence(trials).to_csv(
        paths[2], index=False, float_format=CSV_FLOAT_FORMAT, lineterminator="\n"
    )
    return paths


def best_so_far(trials: Sequence[Trial]) -> List[float]:
    return trials_frame(trials)["best_so_far"].tolist()


def spec_from_file(path: Union[str, os.PathLike], space: Optional[SearchSpace] = None) -> ModelSpec:
    with open(path, "r", encoding="utf-8") as f:
        data: Dict[str, Any] = json.load(f)
    return ModelSpec.from_dict(data, space)
