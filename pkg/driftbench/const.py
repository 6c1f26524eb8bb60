# Binary labels
BENIGN = 0
MALWARE = 1
CLASS_NAMES = {
    BENIGN: "benign",
    MALWARE: "malware",
}

# Split identifiers (used by cross-split duplicate links)
SPLIT_IDS = {
    "train": 0,
    "validation": 1,
    "test": 2,
}
SPLIT_NAMES = {v: k for k, v in SPLIT_IDS.items()}

# Deduplication modes
DEDUP_MODES = ["offline", "active"]

# Dataset container
CONTAINER_MAGIC = b"SMD1"
CONTAINER_VERSION = 1

# Model checkpoints
CHECKPOINT_FORMAT = "driftbench-model"
CHECKPOINT_VERSION = 1

# Model kinds
MODEL_KINDS = ["RF", "SVM", "GBT", "MLP", "SCC", "HCC"]
MODEL_KINDS_TREE = ["RF", "GBT"]
MODEL_KINDS_NEURAL = ["MLP", "SCC", "HCC"]
MODEL_KINDS_DETERMINISTIC = ["SVM", "GBT"]

# Contrastive learning
DEFAULT_XENT_LAMBDA = 100.0
DEFAULT_MARGIN = 10.0
DEFAULT_PSEUDO_LOSS_NEIGHBORS = 10

# Adam
ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPSILON = 1e-8

# SVM dual coordinate descent
SVM_TOLERANCE = 1e-4
SVM_MAX_EPOCHS = 1000

# Gradient boosting
GBT_MIN_CHILD_WEIGHT = 1.0

# Numerics
PROB_CLAMP = 1e-12
GRADCHECK_STEP = 1e-5

# Evaluation
DECISION_THRESHOLD = 0.5
DEFAULT_SEEDS = [0, 1, 2, 3, 4]
METRIC_NAMES = ["f1", "fpr", "fnr"]

# Active learning selectors
AL_SELECTORS = ["uncertainty", "pseudo_loss"]

# Settings
OFFLINE_SETTINGS = ["merged", "holdout"]
ACTIVE_SETTINGS = ["merged", "holdout"]

# CSV formatting
CSV_FLOAT_FORMAT = "%.6f"

# Environment
ENV_OUTPUT_ROOT = "DRIFTBENCH_OUT"
DEFAULT_OUTPUT_ROOT = "driftbench-out"
