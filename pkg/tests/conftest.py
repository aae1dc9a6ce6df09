"""Shared fixtures: tiny models, toy spectrogram datasets, temporary output roots."""

import numpy as np
import pytest
import torch

from dronerf.src.generating.pipeline.dataset_builder import DatasetItem, LabeledDataset
from dronerf.src.modeling.lsnet.config import LSNetConfig
from dronerf.src.modeling.lsnet.network import build_lsnet


TINY_CONFIG = {
    "stage_channels": (4, 8, 8),
    "stage_depths": (1, 1, 1),
    "head_width": 8,
    "input_size": 32,
    "droppath_max": 0.0,
}


class ToyImage:
    """Stand-in spectrogram exposing the as_input() contract."""

    def __init__(self, values):
        self.values = values.astype(np.float32)

    def as_input(self):
        return self.values


def make_toy_dataset(classes, per_class, size=32, seed=0, snr_grid=(0.0, 10.0), split="train"):
    """
    Separable images: class k lights up rows [4k, 4k + 4) on top of noise.
    """
    rng = np.random.default_rng(seed)
    items = []
    for k, label in enumerate(classes):
        for i in range(per_class):
            image = 0.3 * rng.standard_normal((1, size, size))
            image[0, 4 * k:4 * k + 4, :] += 3.0
            items.append(DatasetItem(
                data=ToyImage(image),
                label=label,
                snr_db=float(snr_grid[i % len(snr_grid)]),
                seed=int(seed * 100_000 + k * 1_000 + i),
                split=split,
            ))
    return LabeledDataset(items=items, split=split, manifest={label: per_class for label in classes})


@pytest.fixture
def default_model():
    return build_lsnet(LSNetConfig(), seed=0)


@pytest.fixture
def tiny_config():
    return dict(TINY_CONFIG)


@pytest.fixture
def tiny_model(tiny_config):
    return build_lsnet(LSNetConfig(num_classes=2, **tiny_config), seed=0)


@pytest.fixture
def toy_two_class():
    return make_toy_dataset(["DJI", "FutabaT7"], per_class=12, seed=1)


@pytest.fixture
def output_root(tmp_path, monkeypatch):
    monkeypatch.setenv("DRONERF_OUTPUT_DIR", str(tmp_path / "runs"))
    return tmp_path / "runs"


@pytest.fixture(autouse=True)
def _torch_threads():
    torch.set_num_threads(1)
    yield
    torch.use_deterministic_algorithms(False)


@pytest.fixture(name="make_toy_dataset")
def make_toy_dataset_fixture():
    return make_toy_dataset


def tiny_experiment_dict(root, **sections):
    """
    Smallest end-to-end experiment: 3 classes x 10 windows at 10 dB, a tiny
    LSNet on 128x128 spectrograms, one epoch.
    """
    data = {
        "name": "tiny",
        "mode": "centralized",
        "dataset": {"per_class": 10, "snr_grid": [10], "splits": {"train": 0.6, "test": 0.4}},
        "split": {"known": ["DJI", "Graupner"], "unknown": ["Noise"]},
        "model": {"stage_channels": [4, 8, 8], "stage_depths": [1, 1, 1], "head_width": 8,
                  "droppath_max": 0.0},
        "optimizer": {"epochs": 1, "batch_size": 4},
        "federated": {"n_clients": 2, "clients_per_round": 2, "rounds": 2, "eval_every": 1},
        "seeds": {"master": 3},
        "output": {"root": str(root)},
    }
    for name, values in sections.items():
        if isinstance(values, dict) and isinstance(data.get(name), dict):
            data[name] = {**data[name], **values}
        else:
            data[name] = values
    return data


@pytest.fixture
def tiny_experiment(tmp_path):
    """Builder for tiny experiment dicts rooted in tmp_path/runs."""
    root = tmp_path / "runs"
    return lambda **sections: tiny_experiment_dict(root, **sections)
