"""
Federation orchestrator.

Runs the select -> broadcast -> local train -> sign -> verify -> aggregate
loop for a fixed number of rounds and keeps an append-only round history.
"""

from dataclasses import asdict, dataclass, field
from datetime import datetime
from pathlib import Path

from joblib import Parallel, delayed
from tqdm import tqdm

from dronerf.src.errors import ConfigurationError, LocalTrainingError
from dronerf.src.federating.clients.client import make_clients, partition_data, round_seeds
from dronerf.src.federating.config.config import (
    BATCH_SIZE,
    BEHAVIOURS,
    CLIENTS_PER_ROUND,
    EVAL_EVERY,
    FEDERATED_LR,
    LOCAL_EPOCHS,
    MIN_SHARD_PER_CLASS,
    N_CLIENTS,
    NORM_BOUND_FACTOR,
    REASON_ABORTED,
    ROUNDS,
    STREAM_INIT,
)
from dronerf.src.federating.pipeline.statistics import RoundStats
from dronerf.src.federating.security.signing import KeyRegistry
from dronerf.src.federating.security.verifier import VerificationPolicy
from dronerf.src.federating.server.aggregator import get_parameters, set_parameters
from dronerf.src.federating.server.coordinator import FederationServer, select_clients
from dronerf.src.modeling.loss.class_anchor import DEFAULT_ALPHA, DEFAULT_LAMBDA
from dronerf.src.modeling.lsnet.checkpoint import save_checkpoint
from dronerf.src.modeling.lsnet.network import build_lsnet
from dronerf.src.modeling.training.centralized_trainer import model_config_for
from dronerf.src.modeling.training.sgd_trainer import TrainingConfig
from dronerf.src.utils.run_logger import attach_json_file, detach_handler, get_history_logger
from dronerf.src.utils.seeding import derive_seed


@dataclass(frozen=True)
class FederationConfig:
    n_clients: int = N_CLIENTS
    clients_per_round: int = CLIENTS_PER_ROUND
    rounds: int = ROUNDS
    local_epochs: int = LOCAL_EPOCHS
    lr: float = FEDERATED_LR
    batch_size: int = BATCH_SIZE
    alpha: float = DEFAULT_ALPHA
    lam: float = DEFAULT_LAMBDA
    eval_every: int = EVAL_EVERY
    norm_factor: float = NORM_BOUND_FACTOR
    norm_bound: float = None
    workers: int = 1
    min_shard_per_class: int = MIN_SHARD_PER_CLASS
    behaviours: dict = field(default_factory=dict)

    @classmethod
    def from_dict(cls, data):
        if isinstance(data, cls):
            return data
        known = {k: v for k, v in dict(data or {}).items() if k in cls.__dataclass_fields__}
        if "behaviours" in known:
            known["behaviours"] = {int(k): v for k, v in (known["behaviours"] or {}).items()}
        return cls(**known)

    def validate(self):
        if int(self.n_clients) < 1:
            raise ConfigurationError(f"n_clients must be >= 1, got {self.n_clients}")
        if not (1 <= int(self.clients_per_round) <= int(self.n_clients)):
            raise ConfigurationError(
                f"clients_per_round must be in [1, {self.n_clients}], got {self.clients_per_round}"
            )
        if int(self.rounds) < 0 or int(self.local_epochs) < 0:
            raise ConfigurationError("rounds and local_epochs must be >= 0")
        if int(self.eval_every) < 1:
            raise ConfigurationError(f"eval_every must be >= 1, got {self.eval_every}")
        unknown = sorted(set(self.behaviours.values()) - set(BEHAVIOURS))
        if unknown:
            raise ConfigurationError(f"Unknown client behaviours {unknown}; expected {BEHAVIOURS}")
        self.training_config().validate()
        self.policy().validate()
        return self

    def training_config(self):
        return TrainingConfig(epochs=self.local_epochs, lr=self.lr, batch_size=self.batch_size,
                              alpha=self.alpha, lam=self.lam)

    def policy(self):
        return VerificationPolicy(norm_bound=self.norm_bound, norm_factor=self.norm_factor)

    def to_dict(self):
        return asdict(self)


@dataclass
class RoundRecord:
    round_index: int
    selected: list
    verdicts: dict              # client id -> {'accepted', 'reason', 'norm'}
    aggregate_norm: float
    carried_forward: bool = False
    metrics: dict = field(default_factory=dict)

    def to_dict(self):
        return {
            "round": self.round_index,
            "selected": list(self.selected),
            "verdicts": [
                {"client": int(cid), "accepted": bool(v["accepted"]), "reason": v["reason"],
                 "norm": None if v["norm"] is None else float(v["norm"])}
                for cid, v in sorted(self.verdicts.items())
            ],
            "aggregate_norm": float(self.aggregate_norm),
            "carried_forward": bool(self.carried_forward),
            "metrics": {k: float(v) for k, v in self.metrics.items()},
        }


def _train_client(client, global_parameters, classes, training_config, seeds):
    try:
        return client.train(global_parameters, classes, training_config, seeds)
    except LocalTrainingError as e:
        return e


def run_federation(train_set, classes, model_config, config, seed, evaluate=None,
                   history_path=None, checkpoint_dir=None, registry_path=None,
                   run_id="federation", show_progress=True, verbose=True):
    """
    Main federation pipeline.

    Coordinates:
    1. Partition the training set into client shards
    2. Register client keys and start the server with the initial model
    3. For every round: select, train locally, sign, verify, aggregate
    4. Evaluate and checkpoint on the eval cadence
    5. Report statistics

    Args:
        train_set (LabeledDataset): spectrogram training items (known classes)
        classes (list): known class order
        model_config (LSNetConfig or dict): architecture
        config (FederationConfig or dict): federation settings
        seed (int): master seed; the whole history is a function of it
        evaluate (callable): evaluate(model, round_index) -> metrics dict
        history_path (Path): rounds.jsonl target
        checkpoint_dir (Path): where eval-cadence checkpoints go
        registry_path (Path): where the public key registry is written

    Returns:
        tuple: (global LSNet, list of RoundRecord, RoundStats)
    """
    config = FederationConfig.from_dict(config).validate()
    stats = RoundStats()
    training_config = config.training_config()

    if verbose:
        print("\n" + "=" * 70)
        print("FEDERATION PIPELINE - ZERO-TRUST FEDAVG")
        print("=" * 70)
        print(f"Started at: {datetime.now().strftime('%Y-%m-%d %H:%M:%S')}\n")

    model_config = model_config_for(model_config, classes)
    global_model = build_lsnet(model_config, seed=derive_seed(seed, STREAM_INIT))

    shards = partition_data(train_set, config.n_clients, seed, config.min_shard_per_class)
    clients = make_clients(shards, lambda: build_lsnet(model_config, seed=0), seed, config.behaviours)

    registry = KeyRegistry()
    for client in clients:
        registry.register(client.client_id, client.private_key)
    if registry_path is not None:
        registry.save(registry_path)
    server = FederationServer(registry, get_parameters(global_model), seed, config.policy())

    if verbose:
        print("-" * 70)
        print(f"Clients: {config.n_clients} | per round: {config.clients_per_round} | rounds: {config.rounds}")
        print(f"Shard sizes: {[len(s) for s in shards]}")
        print(f"Local epochs: {config.local_epochs} | lr {config.lr} | batch {config.batch_size}")
        print("-" * 70 + "\n")

    history_logger = get_history_logger(run_id)
    handler = attach_json_file(history_logger, history_path, {"run_id": run_id}) if history_path else None

    history = []
    rounds = range(int(config.rounds))
    if show_progress:
        rounds = tqdm(rounds, desc="Rounds")

    try:
        for t in rounds:
            selected = select_clients(config.n_clients, config.clients_per_round, t, seed)
            nonce = server.open_round(t)
            broadcast = server.global_parameters

            jobs = (
                delayed(_train_client)(clients[cid], broadcast, classes, training_config,
                                       round_seeds(seed, t, cid, config.local_epochs))
                for cid in selected
            )
            results = Parallel(n_jobs=max(1, int(config.workers)), backend="threading")(jobs)

            for cid, result in zip(selected, results):
                if isinstance(result, Exception):
                    stats.record_error(f"round {t} client {cid}: {result}")
                    server.record_abort(cid, REASON_ABORTED)
                    continue
                parameters, sample_count = result
                server.receive(clients[cid].submit(parameters, sample_count, t, nonce, seed))

            new_global, aggregate_norm, carried = server.close_round()

            metrics = {}
            if (t + 1) % config.eval_every == 0 or t == config.rounds - 1:
                set_parameters(global_model, new_global)
                if evaluate is not None:
                    metrics = dict(evaluate(global_model, t))
                if checkpoint_dir is not None:
                    save_checkpoint(global_model, Path(checkpoint_dir) / f"round_{t + 1:04d}.ckpt",
                                    extra={"round": t + 1, "run_id": run_id})

            record = RoundRecord(t, selected, dict(server.verdicts), aggregate_norm, carried, metrics)
            history.append(record)
            stats.record_round(record)
            history_logger.info("round", extra=record.to_dict())
    finally:
        detach_handler(history_logger, handler)
        stats.finish()

    set_parameters(global_model, server.global_parameters)
    global_model.eval()

    if verbose:
        print("\n" + "=" * 70)
        print("FEDERATION COMPLETE")
        print("=" * 70)
        print(f"\nCompleted at: {datetime.now().strftime('%Y-%m-%d %H:%M:%S')}")
        stats.print_summary()
    return global_model, history, stats
