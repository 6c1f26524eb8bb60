import argparse
import json
import logging
import os
import sys
from datetime import datetime, timezone
from typing import Any, Dict, List, Optional, Sequence

from .active_learning import ALConfig, run_active_learning
from .config import ExperimentConfig, parse_seeds
from .const import DEFAULT_OUTPUT_ROOT, ENV_OUTPUT_ROOT
from .container import load_container, save_container
from .dataset import Dataset, SplitDataset, split_by_counts, temporal_split
from .dedup import dedup, dedup_stats
from .evaluation import RunReport, aggregate_seeds, read_report, run_offline, write_report
from .exceptions import DriftBenchError, RunError, SpecificationError, UsageError
from .hpo import run_search_active, run_search_offline, write_search
from .importers import import_packed_arrays, import_text
from .synth import SynthConfig, synthesize

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_RUNTIME = 2


class _ArgumentParser(argparse.ArgumentParser):
    def error(self, message: str):
        raise UsageError(message)


def _output_root(flag: Optional[str]) -> str:
    return flag or os.environ.get(ENV_OUTPUT_ROOT) or DEFAULT_OUTPUT_ROOT


def load_dataset(path: str, dimension: Optional[int] = None, fmt: Optional[str] = None) -> Dataset:
    """
    Loads a container (``.smd``), a text dataset (``.csv``/``.jsonl``) or a
    packed-array release (``.npz``).

    Raises:
        UsageError: The file does not exist.
    """
    if not os.path.exists(path):
        raise UsageError(f"dataset not found: {path}.")
    ext = os.path.splitext(path)[1].lower()
    if fmt == "packed-arrays" or (fmt is None and ext == ".npz"):
        return import_packed_arrays(path, dimension)
    if fmt == "text" or (fmt is None and ext in (".csv", ".jsonl", ".json")):
        return import_text(path, dimension)
    return load_container(path)[0]


def _split(config: ExperimentConfig, dataset: Dataset) -> SplitDataset:
    def _range(name: str):
        r = config[name]
        return tuple(r) if r is not None else None

    if config["train_months"] is not None:
        return temporal_split(dataset, _range("train_months"), _range("val_months"), _range("test_months"))
    if config["split_counts"] is not None:
        return split_by_counts(dataset, *config["split_counts"])
    raise UsageError("config should set train_months or split_counts.")


def _prepared_split(config: ExperimentConfig, protocol: str) -> SplitDataset:
    if config["dataset"] is None:
        raise UsageError("dataset should be set (--dataset or config).")
    split = _split(config, load_dataset(config["dataset"], config["dimension"]))
    mode = config.dedup_mode(protocol)
    return dedup(split, mode) if mode is not None else split


def _write_manifest(out: str, command: str, config: Optional[ExperimentConfig], seeds: Sequence[int], outputs: List[str]) -> str:
    from . import __version__

    manifest: Dict[str, Any] = {
        "tool": "driftbench",
        "version": __version__,
        "command": command,
        "config_hash": config.hash() if config is not None else None,
        "seeds": list(seeds),
        "outputs": sorted(os.path.relpath(p, out) for p in outputs),
        "created": datetime.now(timezone.utc).isoformat(),
    }
    path = os.path.join(out, "manifest.json")
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        json.dump(manifest, f, sort_keys=True, indent=2)
        f.write("\n")
    return path


def _load_config(args: argparse.Namespace) -> ExperimentConfig:
    config = ExperimentConfig.load(args.config) if args.config else ExperimentConfig.new()
    overrides = list(args.set or [])
    if getattr(args, "dataset", None):
        overrides.append(f"dataset={json.dumps(args.dataset)}")
    if getattr(args, "seed", None):
        overrides.append(f"seeds={json.dumps(parse_seeds(args.seed))}")
    if getattr(args, "jobs", None):
        overrides.append(f"jobs={args.jobs}")
    return config.with_overrides(overrides)


def _cmd_import(args: argparse.Namespace) -> int:
    dataset = load_dataset(args.source, args.dimension, args.format)
    out = _output_root(args.out)
    os.makedirs(out, exist_ok=True)
    path = os.path.join(out, f"{dataset.name or 'dataset'}.smd")
    save_container(dataset, path)
    _write_manifest(out, "import", None, [], [path])
    print(f"{len(dataset)} samples, {len(dataset.months)} months, dimension {dataset.dimension} -> {path}")
    return EXIT_OK


def _cmd_dedup(args: argparse.Namespace) -> int:
    config = _load_config(args)
    out = config.output_root(args.out)
    mode = args.mode or config.dedup_mode("offline") or "offline"
    if config["dataset"] is None:
        raise UsageError("dataset should be set (--dataset or config).")
    split = _split(config, load_dataset(config["dataset"], config["dimension"]))
    result = dedup(split, mode)
    os.makedirs(out, exist_ok=True)
    outputs = []
    for name, ds in result.items():
        path = os.path.join(out, f"{name}.smd")
        save_container(ds, path)
        outputs.append(path)
    outputs += dedup_stats(split, mode).write_csv(out)
    _write_manifest(out, "dedup", config, [], outputs)
    return EXIT_OK


def _cmd_stats(args: argparse.Namespace) -> int:
    config = _load_config(args)
    out = config.output_root(args.out)
    mode = args.mode or config.dedup_mode("offline") or "offline"
    if config["dataset"] is None:
        raise UsageError("dataset should be set (--dataset or config).")
    split = _split(config, load_dataset(config["dataset"], config["dimension"]))
    report = dedup_stats(split, mode)
    outputs = report.write_csv(out)
    _write_manifest(out, "stats", config, [], outputs)
    summary = report.counts[report.counts["month"] == "all"]
    print(summary.to_string(index=False))
    if report.label_conflicts:
        print(f"label conflicts: {report.label_conflicts}")
    return EXIT_OK


def _seed_runs(config: ExperimentConfig, out: str, run) -> List[str]:
    outputs = []
    reports: List[RunReport] = []
    for seed in config.seeds():
        try:
            report, extra = run(seed)
        except SpecificationError:
            raise
        except DriftBenchError as err:
            raise RunError(f"seed {seed}: {err}") from err
        seed_dir = os.path.join(out, f"seed-{seed}")
        outputs += write_report(report, seed_dir)
        if extra is not None:
            outputs.append(extra.write_events(os.path.join(seed_dir, "events.csv")))
        reports.append(report)
        logger.info("Seed %d: mean f1 %.4f.", seed, report.mean("f1"))
    outputs += write_report(aggregate_seeds(reports), out)
    return outputs


def _cmd_offline(args: argparse.Namespace) -> int:
    config = _load_config(args)
    if args.setting:
        config = config.with_overrides([f"setting={args.setting}"])
    out = config.output_root(args.out)
    split = _prepared_split(config, "offline")
    spec = config.spec()
    outputs = _seed_runs(config, out, lambda s: (run_offline(split, spec, config["setting"], s, config["jobs"]), None))
    _write_manifest(out, "offline", config, config.seeds(), outputs)
    return EXIT_OK


def _cmd_active(args: argparse.Namespace) -> int:
    config = _load_config(args)
    if args.setting:
        config = config.with_overrides([f"setting={args.setting}"])
    if args.budget is not None:
        config = config.with_overrides([f"budget={args.budget}"])
    out = config.output_root(args.out)
    split = _prepared_split(config, "active")
    spec = config.spec()
    al = ALConfig(
        budget=config["budget"],
        selector=config["selector"],
        merged_start=config["setting"] == "merged",
        k=config["k"],
        retrain_last_month=config["retrain_last_month"],
        reuse_annotations=config["reuse_annotations"],
    )

    def run(seed: int):
        state, report = run_active_learning(split, spec, al, seed, config["jobs"])
        return report, state

    outputs = _seed_runs(config, out, run)
    _write_manifest(out, "active", config, config.seeds(), outputs)
    return EXIT_OK


def _cmd_hpo(args: argparse.Namespace) -> int:
    config = _load_config(args)
    out = config.output_root(args.out)
    split = _prepared_split(config, args.mode)
    seed = config.seeds()[0]
    if args.mode == "active":
        best, trials = run_search_active(
            split, config["model"], config["hpo_budget"], config["al_budget"], seed, jobs=config["jobs"]
        )
    else:
        best, trials = run_search_offline(split, config["model"], config["hpo_budget"], seed, jobs=config["jobs"])
    outputs = write_search(best, trials, out)
    _write_manifest(out, "hpo", config, [seed], outputs)
    return EXIT_OK


def _cmd_report(args: argparse.Namespace) -> int:
    out = _output_root(args.out)
    reports = [read_report(d) for d in args.runs]
    outputs = write_report(aggregate_seeds(reports), out)
    _write_manifest(out, "report", None, [], outputs)
    return EXIT_OK


def _cmd_synth(args: argparse.Namespace) -> int:
    config = SynthConfig(
        months=args.months,
        start=args.start,
        dimension=args.dimension,
        per_month=args.per_month,
        malware_prior=args.malware_prior,
        families=args.families,
        drift_rate=args.drift_rate,
        drift_month=args.drift_month,
        dupe_rate=args.dupe_rate,
        seed=args.seed,
    )
    out = _output_root(args.out)
    os.makedirs(out, exist_ok=True)
    path = args.output or os.path.join(out, "synth.smd")
    save_container(synthesize(config), path)
    _write_manifest(out, "synth", None, [args.seed], [path])
    return EXIT_OK


def _run_options(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON experiment config.")
    p.add_argument("--set", action="append", metavar="KEY=VALUE", help="Override a config key.")
    p.add_argument("--dataset", help="Dataset file (container, csv, jsonl or npz).")
    p.add_argument("--seed", help="Comma separated seeds.")
    p.add_argument("--jobs", type=int, help="Parallel HPO trials or RF trees.")
    p.add_argument("--out", help="Output directory.")


def build_parser() -> argparse.ArgumentParser:
    parser = _ArgumentParser(prog="driftbench", description="Malware classifier drift benchmark.")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", parser_class=_ArgumentParser)

    p = sub.add_parser("import", help="Convert a text or packed-array dataset to a container.")
    p.add_argument("source")
    p.add_argument("--format", choices=["text", "packed-arrays"])
    p.add_argument("--dimension", type=int)
    p.add_argument("--out")
    p.set_defaults(func=_cmd_import)

    for name, func, help_ in (
        ("dedup", _cmd_dedup, "Deduplicate a split dataset."),
        ("stats", _cmd_stats, "Report duplicate statistics."),
    ):
        p = sub.add_parser(name, help=help_)
        _run_options(p)
        p.add_argument("--mode", choices=["offline", "active"])
        p.set_defaults(func=func)

    p = sub.add_parser("offline", help="Offline merged or holdout runs.")
    _run_options(p)
    p.add_argument("--setting", choices=["merged", "holdout"])
    p.set_defaults(func=_cmd_offline)

    p = sub.add_parser("active", help="Active learning runs.")
    _run_options(p)
    p.add_argument("--setting", choices=["merged", "holdout"])
    p.add_argument("--budget", type=int)
    p.set_defaults(func=_cmd_active)

    p = sub.add_parser("hpo", help="Random hyperparameter search.")
    _run_options(p)
    p.add_argument("--mode", choices=["offline", "active"], default="offline")
    p.set_defaults(func=_cmd_hpo)

    p = sub.add_parser("report", help="Aggregate run directories over seeds.")
    p.add_argument("runs", nargs="+")
    p.add_argument("--out")
    p.set_defaults(func=_cmd_report)

    p = sub.add_parser("synth", help="Generate a drifting synthetic dataset.")
    p.add_argument("--months", type=int, default=24)
    p.add_argument("--start", default="2019-01")
    p.add_argument("--dimension", type=int, default=200)
    p.add_argument("--per-month", type=int, default=200)
    p.add_argument("--malware-prior", type=float, default=0.2)
    p.add_argument("--families", type=int, default=5)
    p.add_argument("--drift-rate", type=float, default=0.0)
    p.add_argument("--drift-month", type=int)
    p.add_argument("--dupe-rate", type=float, default=0.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--output")
    p.add_argument("--out")
    p.set_defaults(func=_cmd_synth)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    """
    Runs the command line. Returns 0 on success, 1 on usage errors and 2 on
    runtime errors.
    """
    try:
        args = build_parser().parse_args(argv)
    except UsageError as err:
        print(f"driftbench: {err}", file=sys.stderr)
        return EXIT_USAGE
    level = logging.WARNING if args.verbose == 0 else logging.INFO if args.verbose == 1 else logging.DEBUG
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    if not getattr(args, "command", None):
        print("driftbench: a command is required.", file=sys.stderr)
        return EXIT_USAGE
    try:
        return args.func(args)
    except (UsageError, SpecificationError) as err:
        print(f"driftbench: {err}", file=sys.stderr)
        return EXIT_USAGE
    except (DriftBenchError, OSError) as err:
        print(f"driftbench: {err}", file=sys.stderr)
        return EXIT_RUNTIME
