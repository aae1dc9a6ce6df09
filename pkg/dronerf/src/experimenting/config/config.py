"""
Central configuration for the experiment harness.

Holds the default open-set split, desk-scale dataset sizes and the file
names every run directory uses.
"""

from dronerf.src.generating.config.config import CLASS_LABELS, DESK_SNR_GRID

# ============================================================================
# OPEN-SET SPLIT
# ============================================================================

# unknown_count = n marks the first n labels of this order as unknown
UNKNOWN_ORDER = ["Noise", "Taranis", "Turnigy", "Graupner", "FutabaT14", "FutabaT7"]

DEFAULT_UNKNOWN = ["Noise", "Taranis"]
DEFAULT_KNOWN = [label for label in CLASS_LABELS if label not in DEFAULT_UNKNOWN]

MIN_KNOWN_CLASSES = 2

# ============================================================================
# DESK-SCALE DATASET
# ============================================================================

DESK_TRAIN_PER_CLASS = 200
DESK_TEST_PER_CLASS = 50
DESK_PER_CLASS = DESK_TRAIN_PER_CLASS + DESK_TEST_PER_CLASS
DESK_GRID = list(DESK_SNR_GRID)

DATA_SOURCES = ["synthetic", "external"]

# ============================================================================
# RUNS
# ============================================================================

MODES = ["centralized", "federated"]
STAGES = ["config", "data", "spectrograms", "training", "evaluation"]

# federated.clients_per_round value meaning "every client, every round"
ALL_CLIENTS = "all"

CENTRAL_EPOCHS = 50
TRUE_ACCEPT_RATE = 0.95
VALIDATION_SPLIT = "val"

RUN_ID_HASH_LENGTH = 10

# Run directory layout
CONFIG_SNAPSHOT = "config.yaml"
RUN_MANIFEST = "manifest.yaml"
METRICS_FILENAME = "metrics.csv"
METRIC_COLUMNS = ["run_id", "stage", "metric", "group", "value"]
DATA_SUMMARY_FILENAME = "data_summary.csv"
REJECTIONS_FILENAME = "rejections.csv"
RUN_LOG_FILENAME = "run.log.jsonl"
MODEL_FILENAME = "model.ckpt"
CHECKPOINT_DIR = "checkpoints"
EVALUATION_DIR = "evaluation"
SPECTROGRAM_DIR = "spectrograms"
SWEEP_FILENAME = "sweep.csv"
REPORT_DIR = "report"

# ============================================================================
# ENVIRONMENT
# ============================================================================

NUM_THREADS_ENV = "DRONERF_NUM_THREADS"
