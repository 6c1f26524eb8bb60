from .active_learning import (
    ALConfig,
    ALState,
    run_active_learning,
    select_pseudo_loss,
    select_uncertain,
)
from .config import ExperimentConfig
from .container import decode_container, encode_container, load_container, save_container
from .dataset import (
    Dataset,
    DuplicateAnnotation,
    FeatureVector,
    Sample,
    SplitDataset,
    class_ratio,
    split_by_counts,
    temporal_split,
)
from .dedup import (
    DedupReport,
    annotate,
    dedup,
    dedup_active,
    dedup_offline,
    dedup_stats,
    find_duplicates,
)
from .evaluation import (
    MonthMetrics,
    RunReport,
    SeedAggregate,
    aggregate_seeds,
    month_metrics,
    pooled_metrics,
    read_report,
    run_offline,
    write_report,
)
from .exceptions import (
    CorruptionError,
    DecodeError,
    DriftBenchError,
    EncodeError,
    FormatError,
    NumericError,
    ParseError,
    RangeError,
    RunError,
    SamplingError,
    SearchError,
    SelectionError,
    SpecificationError,
    TrainingError,
    UnsupportedFormatError,
    UnsupportedOperationError,
    UsageError,
)
from .hpo import (
    Trial,
    hyperparameter_influence,
    run_search_active,
    run_search_offline,
    sample_params,
)
from .importers import import_packed_arrays, import_text
from .losses import bce_loss, build_pair_sets, hcc_loss, mine_triplets, triplet_loss
from .model import Model, feature_importance, fine_tune, fit, predict, predict_proba, uncertainty
from .model_interface import ModelInterface
from .model_spec import ModelSpec
from .samplers import half_sampler
from .search_space import SearchSpace
from .synth import SynthConfig, synthesize

__version__ = "0.1.0"
__title__ = "driftbench"
__description__ = "A benchmark framework for malware classifiers under concept drift"
__url__ = "https://github.com/driftbench/driftbench"
__uri__ = __url__
__doc__ = __description__ + " <" + __uri__ + ">"
__author__ = "driftbench developers"
__email__ = ""
__license__ = "MIT"
__copyright__ = "Copyright 2026 driftbench developers"
__all__ = [
    "import_text",
    "import_packed_arrays",
    "encode_container",
    "decode_container",
    "save_container",
    "load_container",
    "temporal_split",
    "split_by_counts",
    "class_ratio",
    "find_duplicates",
    "annotate",
    "dedup",
    "dedup_offline",
    "dedup_active",
    "dedup_stats",
    "bce_loss",
    "triplet_loss",
    "hcc_loss",
    "mine_triplets",
    "build_pair_sets",
    "half_sampler",
    "fit",
    "predict",
    "predict_proba",
    "uncertainty",
    "fine_tune",
    "feature_importance",
    "select_uncertain",
    "select_pseudo_loss",
    "run_active_learning",
    "month_metrics",
    "run_offline",
    "aggregate_seeds",
    "pooled_metrics",
    "write_report",
    "read_report",
    "sample_params",
    "run_search_offline",
    "run_search_active",
    "hyperparameter_influence",
    "synthesize",
    "Dataset",
    "DuplicateAnnotation",
    "FeatureVector",
    "Sample",
    "SplitDataset",
    "DedupReport",
    "Model",
    "ModelInterface",
    "ModelSpec",
    "SearchSpace",
    "ALConfig",
    "ALState",
    "MonthMetrics",
    "RunReport",
    "SeedAggregate",
    "Trial",
    "ExperimentConfig",
    "SynthConfig",
    "DriftBenchError",
    "SpecificationError",
    "ParseError",
    "RangeError",
    "FormatError",
    "EncodeError",
    "DecodeError",
    "UnsupportedFormatError",
    "CorruptionError",
    "NumericError",
    "UsageError",
    "TrainingError",
    "UnsupportedOperationError",
    "SamplingError",
    "SelectionError",
    "SearchError",
    "RunError",
]
