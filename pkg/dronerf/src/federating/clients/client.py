"""
Federated clients: data partitioning, local training and submission.
"""

from collections import defaultdict
from dataclasses import dataclass, field

import numpy as np

from dronerf.src.errors import ConfigurationError, LocalTrainingError, NonFiniteError, ValidationError
from dronerf.src.federating.config.config import (
    BEHAVIOURS,
    FOREIGN_KEY,
    HONEST,
    MIN_SHARD_PER_CLASS,
    NAN,
    REPLAY,
    STREAM_FOREIGN,
    STREAM_PARTITION,
    STREAM_TRAIN,
    TAMPER,
)
from dronerf.src.federating.security.signing import generate_keypair, sign_update
from dronerf.src.federating.server.aggregator import copy_parameters, get_parameters, set_parameters
from dronerf.src.generating.pipeline.dataset_builder import LabeledDataset
from dronerf.src.modeling.training.sgd_trainer import dataset_tensors, sgd_train
from dronerf.src.utils.seeding import derive_seed, rng_for


def federation_seed_schedule(master_seed, rounds, epochs, client_id):
    """
    Epoch seeds a client uses in every round.

    Returns:
        list: rounds x epochs nested list; flattening it gives the schedule a
            centralized run needs to reproduce an m=c=1 federation
    """
    return [round_seeds(master_seed, t, client_id, epochs) for t in range(int(rounds))]


def round_seeds(master_seed, round_index, client_id, epochs):
    return [derive_seed(master_seed, STREAM_TRAIN, round_index, client_id, e) for e in range(int(epochs))]


def partition_data(dataset, n_clients, seed=0, min_per_class=MIN_SHARD_PER_CLASS):
    """
    IID class-balanced partition into disjoint shards.

    Each class' items are shuffled and dealt into n_clients contiguous
    chunks; remainders go one each to the lowest client ids. Items keep their
    original dataset order inside a shard.

    Raises:
        ValidationError: a shard would hold fewer than min_per_class windows
            of some class
    """
    n_clients = int(n_clients)
    if n_clients < 1:
        raise ConfigurationError(f"n_clients must be >= 1, got {n_clients}")
    if n_clients == 1:
        return [LabeledDataset(items=list(dataset.items), split=dataset.split, manifest=dataset.counts())]

    by_class = defaultdict(list)
    for index, item in enumerate(dataset.items):
        by_class[item.label].append(index)

    assigned = [[] for _ in range(n_clients)]
    for class_index, label in enumerate(dataset.classes):
        indices = np.asarray(by_class[label])
        if len(indices) // n_clients < min_per_class:
            raise ValidationError(
                f"Class {label}: {len(indices)} windows cannot give {n_clients} shards "
                f"at least {min_per_class} each"
            )
        shuffled = rng_for(seed, STREAM_PARTITION, class_index).permutation(indices)
        for client, chunk in enumerate(np.array_split(shuffled, n_clients)):
            assigned[client].extend(int(i) for i in chunk)

    shards = []
    for indices in assigned:
        items = [dataset.items[i] for i in sorted(indices)]
        shard = LabeledDataset(items=items, split=dataset.split)
        shard.manifest = shard.counts()
        shards.append(shard)
    return shards


def local_train(global_parameters, shard, classes, config, epoch_seeds, model):
    """
    Local SGD on the class-anchor loss, starting from the global model.

    Args:
        global_parameters (OrderedDict): broadcast model
        shard (LabeledDataset or tuple): spectrogram shard, or (inputs, targets)
        classes (list): known class order
        config (TrainingConfig): lr, batch, alpha, lambda
        epoch_seeds (list): one seed per local epoch
        model (LSNet): the client's replica, overwritten with the global state

    Returns:
        tuple: (updated parameter set, sample count)

    Raises:
        LocalTrainingError: loss or activations became non-finite
    """
    inputs, targets = shard if isinstance(shard, tuple) else dataset_tensors(shard, classes)
    if len(targets) == 0:
        raise ValidationError("Empty shard")
    if not epoch_seeds:
        return copy_parameters(global_parameters), int(len(targets))

    set_parameters(model, global_parameters)
    try:
        sgd_train(model, inputs, targets, config, epoch_seeds)
    except NonFiniteError as e:
        raise LocalTrainingError(f"local training diverged at {e.where}: {e}") from e
    return get_parameters(model), int(len(targets))


def _flip_byte(parameters, seed):
    tampered = copy_parameters(parameters)
    rng = rng_for(seed, STREAM_FOREIGN)
    names = [n for n in tampered if tampered[n].size > 0]
    name = names[int(rng.integers(len(names)))]
    raw = tampered[name].reshape(-1).view(np.uint8)
    raw[int(rng.integers(raw.size))] ^= 0xFF
    return tampered


def _inject_nan(parameters):
    poisoned = copy_parameters(parameters)
    for name, value in poisoned.items():
        if np.issubdtype(value.dtype, np.floating) and value.size:
            value.reshape(-1)[0] = np.nan
            break
    return poisoned


@dataclass
class ClientState:
    client_id: int
    shard: LabeledDataset
    private_key: object
    model: object
    behaviour: str = HONEST
    tensors: tuple = None
    last_update: object = field(default=None, repr=False)

    @property
    def sample_count(self):
        return len(self.shard)

    def train(self, global_parameters, classes, config, epoch_seeds):
        if self.tensors is None:
            self.tensors = dataset_tensors(self.shard, classes)
        return local_train(global_parameters, self.tensors, classes, config, epoch_seeds, self.model)

    def submit(self, parameters, sample_count, round_index, nonce, master_seed):
        """Sign (and for adversarial behaviours, corrupt) an update."""
        behaviour = self.behaviour
        signed = sign_update(parameters, self.client_id, round_index, nonce, sample_count, self.private_key)
        update = signed
        if behaviour == REPLAY and self.last_update is not None:
            update = self.last_update
        elif behaviour == NAN:
            update = sign_update(_inject_nan(parameters), self.client_id, round_index, nonce,
                                 sample_count, self.private_key)
        elif behaviour == FOREIGN_KEY:
            foreign = generate_keypair(derive_seed(master_seed, STREAM_FOREIGN), self.client_id)
            update = sign_update(parameters, self.client_id, round_index, nonce, sample_count, foreign)
        elif behaviour == TAMPER:
            update = signed.with_parameters(
                _flip_byte(parameters, derive_seed(master_seed, round_index, self.client_id)))
        self.last_update = signed
        return update


def make_clients(shards, model_factory, seed, behaviours=None):
    """
    One ClientState per shard, each with its own key and model replica.

    Args:
        shards (list): LabeledDataset per client
        model_factory (callable): returns a fresh LSNet
        seed (int): federation master seed (keys are derived from it)
        behaviours (dict): client id -> behaviour name (default honest)
    """
    behaviours = behaviours or {}
    clients = []
    for client_id, shard in enumerate(shards):
        behaviour = behaviours.get(client_id, HONEST)
        if behaviour not in BEHAVIOURS:
            raise ConfigurationError(f"Unknown client behaviour {behaviour!r}")
        clients.append(ClientState(
            client_id=client_id,
            shard=shard,
            private_key=generate_keypair(seed, client_id),
            model=model_factory(),
            behaviour=behaviour,
        ))
    return clients
