"""
Centralized training orchestrator.

Trains one LSNet on the pooled training set with the class-anchor loss.
"""

from datetime import datetime

from dronerf.src.modeling.lsnet.config import LSNetConfig
from dronerf.src.modeling.lsnet.network import build_lsnet, param_count
from dronerf.src.modeling.training.sgd_trainer import TrainingConfig, dataset_tensors, sgd_train
from dronerf.src.modeling.training.statistics import TrainingStats
from dronerf.src.utils.seeding import derive_seed


def centralized_seed_schedule(seed, epochs):
    """One derived seed per epoch."""
    return [derive_seed(seed, epoch) for epoch in range(int(epochs))]


def model_config_for(model_config, classes):
    """LSNetConfig with num_classes set to the known class count."""
    data = LSNetConfig.from_dict(model_config or {}).to_dict()
    data["num_classes"] = len(classes)
    return LSNetConfig.from_dict(data).validate()


def train_centralized(train_set, classes, model_config, training_config, seed,
                      epoch_seeds=None, model=None, show_progress=True, verbose=True):
    """
    Main centralized training pipeline.

    Coordinates:
    1. Build (or reuse) the model
    2. Stack spectrograms into tensors
    3. Run SGD epochs on the class-anchor loss
    4. Report statistics

    Args:
        train_set (LabeledDataset): spectrogram items
        classes (list): known class order; index i is center i
        model_config (LSNetConfig or dict): architecture
        training_config (TrainingConfig or dict): epochs, lr, batch, alpha, lambda
        seed (int): initialization seed and epoch seed root
        epoch_seeds (list): explicit per-epoch seeds (overrides the schedule)
        model (LSNet): start from this model instead of a fresh build

    Returns:
        tuple: (LSNet, TrainingStats)
    """
    config = TrainingConfig.from_dict(training_config).validate()
    stats = TrainingStats("centralized")

    if verbose:
        print("\n" + "=" * 70)
        print("TRAINING PIPELINE - CENTRALIZED")
        print("=" * 70)
        print(f"Started at: {datetime.now().strftime('%Y-%m-%d %H:%M:%S')}\n")

    if model is None:
        model = build_lsnet(model_config_for(model_config, classes), seed=derive_seed(seed, 0))

    inputs, targets = dataset_tensors(train_set, classes)
    stats.record_samples(len(targets))
    seeds = epoch_seeds if epoch_seeds is not None else centralized_seed_schedule(seed, config.epochs)

    if verbose:
        print("-" * 70)
        print(f"Classes: {', '.join(classes)}")
        print(f"Samples: {len(targets)} | Parameters: {param_count(model):,}")
        print(f"Epochs: {len(seeds)} | lr {config.lr} | batch {config.batch_size}")
        print("-" * 70 + "\n")

    try:
        sgd_train(model, inputs, targets, config, seeds, show_progress=show_progress, stats=stats)
    except Exception as e:
        stats.record_error(str(e))
        raise
    finally:
        stats.finish()

    if verbose:
        print("\n" + "=" * 70)
        print("TRAINING COMPLETE")
        print("=" * 70)
        print(f"\nCompleted at: {datetime.now().strftime('%Y-%m-%d %H:%M:%S')}")
        stats.print_summary()
    return model, stats
