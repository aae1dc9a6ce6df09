"""
Central configuration for the federated phase.

Holds federation defaults, the verification vocabulary and the seed stream
identifiers used to derive per-round and per-client randomness.
"""

# ============================================================================
# FEDERATION DEFAULTS
# ============================================================================

N_CLIENTS = 5
CLIENTS_PER_ROUND = 5
ROUNDS = 200
LOCAL_EPOCHS = 1          # local epochs per round
FEDERATED_LR = 0.05
BATCH_SIZE = 64
EVAL_EVERY = 10
MIN_SHARD_PER_CLASS = 1

# ============================================================================
# ZERO-TRUST POLICY
# ============================================================================

SIGNATURE_SCHEME = "ed25519"
DIGEST_ALGORITHM = "sha256"
NONCE_BYTES = 16
NORM_BOUND_FACTOR = 10.0   # x median accepted update norm of the previous round

# Batch-norm buffers; the update norm covers learned weights only
NORM_EXCLUDED_SUFFIXES = ("running_mean", "running_var", "num_batches_tracked")

# Verification reasons, in the order the checks run
REASON_UNREGISTERED = "unregistered-client"
REASON_BAD_SIGNATURE = "bad-signature"
REASON_DIGEST = "digest-mismatch"
REASON_ROUND = "round-mismatch"
REASON_NONCE = "nonce-mismatch"
REASON_DUPLICATE = "duplicate-submission"
REASON_SHAPE = "shape-mismatch"
REASON_NON_FINITE = "non-finite"
REASON_NORM = "norm-bound"
REASON_ABORTED = "training-aborted"

REJECTION_REASONS = [
    REASON_UNREGISTERED,
    REASON_BAD_SIGNATURE,
    REASON_DIGEST,
    REASON_ROUND,
    REASON_NONCE,
    REASON_DUPLICATE,
    REASON_SHAPE,
    REASON_NON_FINITE,
    REASON_NORM,
    REASON_ABORTED,
]

# ============================================================================
# CLIENT BEHAVIOURS (test fixtures)
# ============================================================================

HONEST = "honest"
TAMPER = "tamper"              # flip one byte after signing
NAN = "nan"                    # inject NaN, then sign
REPLAY = "replay"              # resubmit the previous round's update
FOREIGN_KEY = "foreign-key"    # sign with a key the server never registered

BEHAVIOURS = [HONEST, TAMPER, NAN, REPLAY, FOREIGN_KEY]

# ============================================================================
# SEED STREAMS
# ============================================================================

STREAM_INIT = 0
STREAM_SELECT = 1
STREAM_TRAIN = 2
STREAM_NONCE = 3
STREAM_KEYS = 4
STREAM_PARTITION = 5
STREAM_FOREIGN = 6

HISTORY_FILENAME = "rounds.jsonl"
REGISTRY_FILENAME = "key_registry.yaml"
