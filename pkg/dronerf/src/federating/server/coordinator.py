"""
Federation server: client selection, round nonces, verification barrier.
"""

from dronerf.src.errors import ValidationError
from dronerf.src.federating.config.config import NONCE_BYTES, STREAM_NONCE, STREAM_SELECT
from dronerf.src.federating.security.verifier import VerificationPolicy, update_norm, verify_update
from dronerf.src.federating.server.aggregator import aggregate, copy_parameters
from dronerf.src.utils.run_logger import get_logger
from dronerf.src.utils.seeding import rng_for


logger = get_logger(__name__)


def select_clients(n_clients, m, round_index, seed):
    """
    Uniform sample of m client ids without replacement, sorted.

    Example:
        >>> select_clients(5, 5, 0, 1)
        [0, 1, 2, 3, 4]
    """
    n_clients, m = int(n_clients), int(m)
    if not (1 <= m <= n_clients):
        raise ValidationError(f"Need 1 <= m <= n_clients, got m={m}, n_clients={n_clients}")
    chosen = rng_for(seed, STREAM_SELECT, round_index).choice(n_clients, size=m, replace=False)
    return sorted(int(c) for c in chosen)


def round_nonce(seed, round_index):
    return rng_for(seed, STREAM_NONCE, round_index).bytes(NONCE_BYTES).hex()


class FederationServer:
    """
    Holds the global model and the key registry; verifies and aggregates.

    Usage per round:
        server.open_round(t)  -> nonce
        server.receive(update) for every submission
        server.close_round()  -> new global parameters
    """

    def __init__(self, registry, global_parameters, seed, policy=None):
        self.registry = registry
        self.global_parameters = copy_parameters(global_parameters)
        self.seed = int(seed)
        self.policy = (policy or VerificationPolicy()).validate()

        self.round_index = None
        self.nonce = None
        self.norm_bound = None
        self.accepted = []
        self.verdicts = {}
        self.previous_norms = []

    def open_round(self, round_index):
        self.round_index = int(round_index)
        self.nonce = round_nonce(self.seed, round_index)
        self.norm_bound = self.policy.bound_for(self.previous_norms)
        self.accepted = []
        self.verdicts = {}
        return self.nonce

    def record_abort(self, client_id, reason):
        self.verdicts[int(client_id)] = {"accepted": False, "reason": reason, "norm": None}

    def receive(self, update):
        """Verify one submission; returns the verdict dict."""
        if self.round_index is None:
            raise ValidationError("No round is open")
        verdict = verify_update(
            update, self.registry, self.round_index, self.nonce, self.global_parameters,
            norm_bound=self.norm_bound,
            seen_clients={u.client_id for u in self.accepted},
        )
        if verdict["accepted"]:
            self.accepted.append(update)
        else:
            logger.info("round %d: rejected client %s (%s)", self.round_index, update.client_id, verdict["reason"])
        if update.client_id not in self.verdicts or verdict["accepted"]:
            self.verdicts[update.client_id] = verdict
        return verdict

    def close_round(self):
        """
        Aggregate accepted updates into the new global model.

        Returns:
            tuple: (global parameters, aggregate norm, carried_forward flag)
        """
        if not self.accepted:
            logger.warning("round %d: every update rejected, carrying the global model forward",
                           self.round_index)
            return self.global_parameters, 0.0, True

        new_global = aggregate(self.accepted)
        norm = update_norm(new_global, self.global_parameters)
        self.previous_norms = [v["norm"] for v in self.verdicts.values() if v["accepted"]]
        self.global_parameters = new_global
        return new_global, norm, False
