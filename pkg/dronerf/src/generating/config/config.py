"""
Central configuration for the RF window generation phase.

Contains physical constants, class labels and dataset defaults.
Emitter parameters live in emitter_profiles.json next to this file.
"""

# ============================================================================
# RECEIVER / CAPTURE
# ============================================================================

SAMPLE_RATE_HZ = 14e6            # after 56 MHz -> 14 MHz decimation
CAPTURE_SAMPLE_RATE_HZ = 56e6    # raw capture rate of external recordings
DECIMATION_FACTOR = 4
WINDOW_LENGTH = 16384            # complex samples per window (~1.17 ms)
RECEIVER_CENTER_HZ = 2.44175e9

# Anti-alias filter for decimation
ANTIALIAS_ORDER = 8
ANTIALIAS_RIPPLE_DB = 0.05

# ============================================================================
# CLASSES
# ============================================================================

CLASS_LABELS = [
    "DJI",
    "FutabaT7",
    "FutabaT14",
    "Graupner",
    "Noise",
    "Taranis",
    "Turnigy",
]

NOISE_LABEL = "Noise"
NOISE_ONLY_LABEL = "noise-only"   # interference windows, never a class
CLEAN_SNR = "clean"

# ============================================================================
# DATASET DEFAULTS
# ============================================================================

SNR_MIN_DB = -20
SNR_MAX_DB = 30
SNR_STEP_DB = 2
FULL_SNR_GRID = list(range(SNR_MIN_DB, SNR_MAX_DB + 1, SNR_STEP_DB))

DEFAULT_SPLITS = {"train": 0.8, "test": 0.2}
FEDERATED_PER_CLASS = 2000

# Desk-scale defaults (CPU-friendly)
DESK_PER_CLASS = 250             # 200 train / 50 test with the 80/20 split
DESK_SNR_GRID = [-10, 0, 10]

# Interference mixed into drone windows
INTERFERENCE_PROBABILITY = 0.5
INTERFERENCE_TO_NOISE_DB = (0.0, 10.0)

# ============================================================================
# ON-DISK LAYOUT
# ============================================================================

RECORD_DTYPE = "<c8"             # interleaved little-endian float32 (re, im)
RECORD_SUFFIX = ".iq"
MANIFEST_FILENAME = "manifest.csv"
MANIFEST_COLUMNS = [
    "file",
    "label",
    "snr_db",
    "seed",
    "split",
    "dtype",
    "endianness",
    "sample_rate",
]
