"""
Zero-trust verification of signed updates.

Checks run in a fixed order and the first failure decides the reason:

    registry -> signature -> digest -> round -> nonce -> duplicate
    -> shapes -> finite -> norm bound
"""

from dataclasses import dataclass

import numpy as np
from cryptography.exceptions import InvalidSignature

from dronerf.src.errors import ConfigurationError
from dronerf.src.federating.config.config import (
    NORM_BOUND_FACTOR,
    NORM_EXCLUDED_SUFFIXES,
    REASON_BAD_SIGNATURE,
    REASON_DIGEST,
    REASON_DUPLICATE,
    REASON_NON_FINITE,
    REASON_NONCE,
    REASON_NORM,
    REASON_ROUND,
    REASON_SHAPE,
    REASON_UNREGISTERED,
)
from dronerf.src.federating.security.signing import compute_digest


@dataclass(frozen=True)
class VerificationPolicy:
    """
    Attributes:
        norm_bound (float): fixed bound on ||update - global||; overrides the factor
        norm_factor (float): bound = factor * median accepted norm of the
            previous round (None disables the check)
    """
    norm_bound: float = None
    norm_factor: float = NORM_BOUND_FACTOR

    def validate(self):
        if self.norm_bound is not None and not self.norm_bound > 0:
            raise ConfigurationError(f"norm_bound must be > 0, got {self.norm_bound}")
        if self.norm_factor is not None and not self.norm_factor > 0:
            raise ConfigurationError(f"norm_factor must be > 0, got {self.norm_factor}")
        return self

    def bound_for(self, previous_norms):
        """Norm bound for a round given the accepted norms of the previous one."""
        if self.norm_bound is not None:
            return float(self.norm_bound)
        if self.norm_factor is None or not previous_norms:
            return None
        return float(self.norm_factor * np.median(previous_norms))


def norm_entries(parameters):
    """Names of the learned entries: floating point, batch-norm buffers excluded."""
    return [
        name for name, value in parameters.items()
        if np.issubdtype(np.asarray(value).dtype, np.floating)
        and not name.endswith(NORM_EXCLUDED_SUFFIXES)
    ]


def update_norm(parameters, reference):
    """L2 distance between two parameter sets over the learned entries."""
    total = 0.0
    for name in norm_entries(parameters):
        value = parameters[name]
        diff = np.asarray(value, dtype=np.float64) - np.asarray(reference[name], dtype=np.float64)
        total += float(np.dot(diff.ravel(), diff.ravel()))
    return float(np.sqrt(total))


def _verdict(accepted, reason=None, norm=None):
    return {"accepted": accepted, "reason": reason, "norm": norm}


def verify_update(update, registry, round_index, nonce, global_parameters,
                  norm_bound=None, seen_clients=()):
    """
    Decide whether an update may enter aggregation.

    Args:
        update (SignedUpdate): submission
        registry (KeyRegistry): registered client keys
        round_index (int): the server's current round
        nonce (str): the server's nonce for this round
        global_parameters (OrderedDict): broadcast global model
        norm_bound (float): maximum ||update - global|| (None: unbounded)
        seen_clients (set): clients already accepted this round

    Returns:
        dict: {'accepted': bool, 'reason': str or None, 'norm': float or None}
    """
    if update.client_id not in registry:
        return _verdict(False, REASON_UNREGISTERED)

    try:
        registry.public_key(update.client_id).verify(update.signature, update.digest)
    except InvalidSignature:
        return _verdict(False, REASON_BAD_SIGNATURE)

    recomputed = compute_digest(update.parameters, update.client_id, update.round_index,
                                update.nonce, update.sample_count)
    if recomputed != update.digest:
        return _verdict(False, REASON_DIGEST)

    if update.round_index != int(round_index):
        return _verdict(False, REASON_ROUND)
    if update.nonce != nonce:
        return _verdict(False, REASON_NONCE)
    if update.client_id in seen_clients:
        return _verdict(False, REASON_DUPLICATE)

    if list(update.parameters) != list(global_parameters) or any(
            np.shape(update.parameters[k]) != np.shape(global_parameters[k]) for k in global_parameters):
        return _verdict(False, REASON_SHAPE)

    if not all(np.isfinite(v).all() for v in update.parameters.values()):
        return _verdict(False, REASON_NON_FINITE)

    norm = update_norm(update.parameters, global_parameters)
    if norm_bound is not None and norm > norm_bound:
        return _verdict(False, REASON_NORM, norm)
    return _verdict(True, None, norm)
