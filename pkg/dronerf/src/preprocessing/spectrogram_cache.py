"""
On-disk spectrogram cache.

Records are 128x128 (or 2x128x128) little-endian float32 arrays, one file per
image, next to a manifest.csv with the same columns as the IQ dataset
manifest plus the normalization statistics. Each parameter set gets its own
sub-directory keyed by a hash of the parameters.
"""

import hashlib
import json
from dataclasses import asdict
from pathlib import Path

import numpy as np
import pandas as pd

from dronerf.src.errors import ValidationError
from dronerf.src.generating.config.config import MANIFEST_COLUMNS, MANIFEST_FILENAME
from dronerf.src.generating.pipeline.dataset_builder import DatasetItem, LabeledDataset
from dronerf.src.preprocessing.spectrogram_transformer import (
    IMAGE_SIZE,
    Spectrogram,
    SpectrogramParams,
    frequency_axis,
    time_axis,
)


IMAGE_DTYPE = "<f4"
IMAGE_SUFFIX = ".spec"
EXTRA_COLUMNS = ["norm_mean", "norm_std", "degenerate"]


class SpectrogramCache:
    """Write and read spectrogram datasets for one parameter set."""

    def __init__(self, root, params=None):
        self.params = SpectrogramParams.from_dict(params).validate()
        self.root = Path(root) / self.key

    @property
    def key(self):
        blob = json.dumps(asdict(self.params), sort_keys=True).encode("utf-8")
        return hashlib.sha256(blob).hexdigest()[:12]

    @property
    def manifest_path(self):
        return self.root / MANIFEST_FILENAME

    def exists(self):
        return self.manifest_path.exists()

    def write(self, dataset):
        """
        Store every spectrogram of a dataset.

        Returns:
            pd.DataFrame: manifest written
        """
        self.root.mkdir(parents=True, exist_ok=True)
        rows = []
        per_label = {}
        for item in dataset.items:
            spec = item.data
            index = per_label.get(item.label, 0)
            per_label[item.label] = index + 1
            relative = Path(item.label) / f"{item.label}_{index:05d}{IMAGE_SUFFIX}"
            (self.root / relative).parent.mkdir(parents=True, exist_ok=True)
            spec.as_input().astype(IMAGE_DTYPE).tofile(self.root / relative)
            rows.append({
                "file": relative.as_posix(),
                "label": item.label,
                "snr_db": item.snr_db,
                "seed": item.seed,
                "split": item.split,
                "dtype": "float32",
                "endianness": "little",
                "sample_rate": spec.sample_rate,
                "norm_mean": spec.norm_mean,
                "norm_std": spec.norm_std,
                "degenerate": bool(spec.degenerate),
            })
        manifest = pd.DataFrame(rows, columns=MANIFEST_COLUMNS + EXTRA_COLUMNS)
        manifest.to_csv(self.manifest_path, index=False)
        return manifest

    def read(self):
        """
        Load the cached dataset.

        Raises:
            ValidationError: cache missing or a record has the wrong size
        """
        if not self.exists():
            raise ValidationError(f"No spectrogram cache at {self.root}")
        frame = pd.read_csv(self.manifest_path)
        channels = self.params.input_channels
        expected = channels * IMAGE_SIZE * IMAGE_SIZE

        items = []
        for row in frame.to_dict(orient="records"):
            values = np.fromfile(self.root / row["file"], dtype=IMAGE_DTYPE)
            if values.size != expected:
                raise ValidationError(f"{row['file']}: expected {expected} values, got {values.size}")
            shape = (IMAGE_SIZE, IMAGE_SIZE) if channels == 1 else (channels, IMAGE_SIZE, IMAGE_SIZE)
            rate = float(row["sample_rate"])
            spec = Spectrogram(
                values=values.reshape(shape).astype(np.float32),
                freq_axis=frequency_axis(self.params.fft_size, rate),
                time_axis=time_axis(IMAGE_SIZE, self.params.hop, rate),
                label=row["label"],
                snr_db=float(row["snr_db"]),
                sample_rate=rate,
                norm_mean=float(row["norm_mean"]),
                norm_std=float(row["norm_std"]),
                degenerate=bool(row["degenerate"]),
            )
            items.append(DatasetItem(
                data=spec,
                label=row["label"],
                snr_db=float(row["snr_db"]),
                seed=int(row["seed"]),
                split=str(row["split"]),
            ))

        counts = {}
        for item in items:
            counts[item.label] = counts.get(item.label, 0) + 1
        return LabeledDataset(items=items, split="all", manifest=counts)
