"""
Seed derivation.

Every stochastic step takes an explicit integer seed. Child seeds are derived
from a parent seed plus integer path components through numpy's SeedSequence,
so (seed, round, client) always maps to the same stream no matter in which
order or on which worker the work happens.
"""

import numpy as np


SEED_BITS = 63


def derive_seed(seed, *path):
    """
    Derive a child seed from a parent seed and an integer path.

    Args:
        seed (int): parent seed (>= 0)
        *path (int): path components, e.g. (round_index, client_id)

    Returns:
        int: child seed in [0, 2**63)

    Example:
        >>> derive_seed(7, 3, 1) == derive_seed(7, 3, 1)
        True
    """
    entropy = [int(seed)] + [int(p) for p in path]
    state = np.random.SeedSequence(entropy).generate_state(2, dtype=np.uint32)
    value = (int(state[0]) << 32) | int(state[1])
    return value & ((1 << SEED_BITS) - 1)


def rng_for(seed, *path):
    """numpy Generator for derive_seed(seed, *path)."""
    return np.random.default_rng(derive_seed(seed, *path))
