"""
Plain mini-batch SGD on the class-anchor loss.

Shared by centralized training and by every federated client, so an m=c=1
federation and a centralized run with the same epoch seeds take exactly the
same steps. Each epoch seed drives both the shuffle order and the drop-path
generator.
"""

from dataclasses import asdict, dataclass

import numpy as np
import torch
from tqdm import tqdm

from dronerf.src.errors import ConfigurationError, NonFiniteError, ValidationError
from dronerf.src.modeling.loss.class_anchor import DEFAULT_ALPHA, DEFAULT_LAMBDA, ClassAnchorLoss
from dronerf.src.preprocessing.spectrogram_transformer import stack_inputs
from dronerf.src.utils.run_logger import get_logger
from dronerf.src.utils.seeding import derive_seed, rng_for


logger = get_logger(__name__)

CENTRAL_LR = 0.01
FEDERATED_LR = 0.05
BATCH_SIZE = 64


@dataclass(frozen=True)
class TrainingConfig:
    epochs: int = 1
    lr: float = CENTRAL_LR
    batch_size: int = BATCH_SIZE
    alpha: float = DEFAULT_ALPHA
    lam: float = DEFAULT_LAMBDA

    @classmethod
    def from_dict(cls, data):
        if isinstance(data, cls):
            return data
        return cls(**{k: v for k, v in dict(data or {}).items() if k in cls.__dataclass_fields__})

    def validate(self):
        if int(self.epochs) < 0:
            raise ConfigurationError(f"epochs must be >= 0, got {self.epochs}")
        if not self.lr > 0:
            raise ConfigurationError(f"lr must be > 0, got {self.lr}")
        if int(self.batch_size) < 2:
            raise ConfigurationError(f"batch_size must be >= 2, got {self.batch_size}")
        if not self.alpha > 0 or self.lam < 0:
            raise ConfigurationError(f"Need alpha > 0 and lambda >= 0, got {self.alpha}, {self.lam}")
        return self

    def to_dict(self):
        return asdict(self)


def dataset_tensors(dataset, classes):
    """
    (inputs, targets) tensors for a spectrogram dataset and a class order.

    Raises:
        ValidationError: empty dataset or label outside classes
    """
    if len(dataset) == 0:
        raise ValidationError("Cannot train on an empty dataset")
    inputs = torch.from_numpy(np.ascontiguousarray(stack_inputs(dataset), dtype=np.float32))
    targets = torch.from_numpy(dataset.label_indices(classes))
    return inputs, targets


def make_batches(n, batch_size, seed):
    """
    Shuffled index batches for one epoch.

    A trailing batch of one sample is merged into the previous batch, since
    batch-norm cannot normalize a single sample in training mode.
    """
    order = rng_for(seed, 0).permutation(n)
    batches = [order[i:i + batch_size] for i in range(0, n, batch_size)]
    if len(batches) > 1 and len(batches[-1]) == 1:
        batches[-2] = np.concatenate([batches[-2], batches.pop()])
    return batches


def train_epoch(model, inputs, targets, loss_fn, optimizer, seed, batch_size, show_progress=False):
    """
    One pass over the data.

    Returns:
        float: mean batch loss

    Raises:
        NonFiniteError: loss or gradients became NaN/Inf
    """
    model.train()
    generator = torch.Generator().manual_seed(derive_seed(seed, 1))
    model.set_drop_path_generator(generator)

    batches = make_batches(len(targets), batch_size, seed)
    if show_progress:
        batches = tqdm(batches, desc="Batches", leave=False)

    losses = []
    try:
        for index in batches:
            index = torch.from_numpy(np.asarray(index, dtype=np.int64))
            optimizer.zero_grad(set_to_none=True)
            loss = loss_fn(model(inputs[index]), targets[index])
            if not torch.isfinite(loss):
                raise NonFiniteError(f"non-finite loss {loss.item()}", where="loss")
            loss.backward()
            optimizer.step()
            losses.append(loss.item())
    finally:
        model.set_drop_path_generator(None)
    return float(np.mean(losses)) if losses else float("nan")


def sgd_train(model, inputs, targets, config, epoch_seeds, show_progress=False, stats=None):
    """
    Train in place for len(epoch_seeds) epochs.

    Args:
        model (LSNet): model to update
        inputs (torch.Tensor): (N, C, H, W)
        targets (torch.Tensor): (N,) int64 class indices
        config (TrainingConfig): lr, batch size, loss hyperparameters
        epoch_seeds (list): one seed per epoch
        show_progress (bool): tqdm bars
        stats (TrainingStats): optional tracker

    Returns:
        list: mean loss per epoch
    """
    config = TrainingConfig.from_dict(config).validate()
    if len(inputs) != len(targets):
        raise ValidationError(f"{len(inputs)} inputs but {len(targets)} targets")
    if len(targets) < 2:
        raise ValidationError("Training needs at least 2 samples")

    loss_fn = ClassAnchorLoss(model.config.num_classes, config.alpha, config.lam)
    optimizer = torch.optim.SGD(model.parameters(), lr=config.lr)

    epochs = enumerate(epoch_seeds, 1)
    if show_progress:
        epochs = tqdm(list(epochs), desc="Epochs")

    history = []
    for epoch, seed in epochs:
        loss = train_epoch(model, inputs, targets, loss_fn, optimizer, seed, config.batch_size)
        history.append(loss)
        logger.debug("epoch %d loss %.6f", epoch, loss)
        if stats is not None:
            stats.record_epoch(epoch, loss)
    model.eval()
    return history
