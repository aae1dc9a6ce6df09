"""
On-disk dataset layout and external recording ingestion.

Layout written by write_dataset:

    <out_dir>/
        manifest.csv
        DJI/DJI_00000.iq
        FutabaT7/...

Each .iq record holds 16,384 complex samples as interleaved little-endian
float32 (real, imag) pairs.
"""

from pathlib import Path

import numpy as np
import pandas as pd
import yaml

from dronerf.src.errors import SignalError, ValidationError
from dronerf.src.generating.config.config import (
    CAPTURE_SAMPLE_RATE_HZ,
    CLASS_LABELS,
    DECIMATION_FACTOR,
    MANIFEST_COLUMNS,
    MANIFEST_FILENAME,
    RECORD_DTYPE,
    RECORD_SUFFIX,
    SAMPLE_RATE_HZ,
    WINDOW_LENGTH,
)
from dronerf.src.generating.pipeline.dataset_builder import DatasetItem, LabeledDataset
from dronerf.src.generating.signals.decimator import decimate
from dronerf.src.generating.signals.emitter_profile import IQWindow
from dronerf.src.utils.run_logger import get_logger


logger = get_logger(__name__)

SUPPORTED_DTYPES = {"float32", "float64", "int16", "int8"}
ENDIAN_PREFIX = {"little": "<", "big": ">"}


def write_dataset(dataset, out_dir):
    """
    Write windows and manifest.csv.

    Args:
        dataset (LabeledDataset): items must hold IQWindow data
        out_dir (str/Path): target directory (created)

    Returns:
        pd.DataFrame: the manifest that was written
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    rows = []
    per_label = {}
    for item in dataset.items:
        index = per_label.get(item.label, 0)
        per_label[item.label] = index + 1
        relative = Path(item.label) / f"{item.label}_{index:05d}{RECORD_SUFFIX}"
        target = out_dir / relative
        target.parent.mkdir(parents=True, exist_ok=True)
        np.asarray(item.data.samples).astype(RECORD_DTYPE).tofile(target)
        rows.append({
            "file": relative.as_posix(),
            "label": item.label,
            "snr_db": item.snr_db,
            "seed": item.seed,
            "split": item.split,
            "dtype": "float32",
            "endianness": "little",
            "sample_rate": item.data.sample_rate,
        })

    manifest = pd.DataFrame(rows, columns=MANIFEST_COLUMNS)
    manifest.to_csv(out_dir / MANIFEST_FILENAME, index=False)
    logger.info("Wrote %d windows to %s", len(rows), out_dir)
    return manifest


def read_manifest(manifest):
    """
    Normalize a manifest into a DataFrame.

    Args:
        manifest: path to .csv/.yaml/.yml, a DataFrame, or a list of dicts

    Returns:
        pd.DataFrame with at least file, label, snr_db, dtype, endianness
    """
    if isinstance(manifest, pd.DataFrame):
        frame = manifest.copy()
    elif isinstance(manifest, (list, tuple)):
        frame = pd.DataFrame(list(manifest))
    else:
        path = Path(manifest)
        if path.suffix.lower() in (".yaml", ".yml"):
            with open(path, 'r', encoding='utf-8') as f:
                loaded = yaml.safe_load(f) or []
            if isinstance(loaded, dict):
                loaded = loaded.get("files", [])
            frame = pd.DataFrame(loaded)
        else:
            frame = pd.read_csv(path)

    required = {"file", "label", "snr_db", "dtype", "endianness"}
    missing = required - set(frame.columns)
    if missing:
        raise ValidationError(f"Manifest is missing columns: {sorted(missing)}")

    defaults = {"sample_rate": SAMPLE_RATE_HZ, "seed": -1, "split": "all"}
    for column, default in defaults.items():
        if column not in frame.columns:
            frame[column] = default
        else:
            frame[column] = frame[column].fillna(default)
    return frame


def read_record(path, dtype, endianness):
    """
    Read one interleaved (real, imag) file into a complex128 vector.

    Raises:
        ValidationError: unsupported dtype/endianness or odd value count
    """
    if dtype not in SUPPORTED_DTYPES:
        raise ValidationError(f"unsupported dtype {dtype!r}")
    if endianness not in ENDIAN_PREFIX:
        raise ValidationError(f"unsupported endianness {endianness!r}")
    raw = np.fromfile(path, dtype=np.dtype(dtype).newbyteorder(ENDIAN_PREFIX[endianness]))
    if raw.size % 2 != 0:
        raise ValidationError("odd number of values; not interleaved IQ")
    pairs = raw.astype(np.float64).reshape(-1, 2)
    return pairs[:, 0] + 1j * pairs[:, 1]


def _windows_from_file(row, root):
    path = Path(row["file"])
    if not path.is_absolute():
        path = Path(root) / path
    if not path.exists():
        raise ValidationError("file not found")

    label = str(row["label"])
    if label not in CLASS_LABELS:
        raise ValidationError(f"unknown label {label!r}")

    iq = read_record(path, str(row["dtype"]), str(row["endianness"]))
    if not np.all(np.isfinite(iq)):
        raise SignalError("non-finite samples")

    rate = float(row["sample_rate"])
    if np.isclose(rate, CAPTURE_SAMPLE_RATE_HZ):
        if iq.size % DECIMATION_FACTOR != 0:
            raise ValidationError("length mismatch: not divisible by decimation factor")
        iq = decimate(iq, DECIMATION_FACTOR)
    elif not np.isclose(rate, SAMPLE_RATE_HZ):
        raise ValidationError(f"unsupported sample rate {rate}")

    if iq.size == 0 or iq.size % WINDOW_LENGTH != 0:
        raise ValidationError(f"length mismatch: {iq.size} samples is not a multiple of {WINDOW_LENGTH}")

    windows = []
    for chunk in np.asarray(iq).reshape(-1, WINDOW_LENGTH):
        window = IQWindow(
            samples=chunk.astype(np.complex64),
            sample_rate=SAMPLE_RATE_HZ,
            snr_db=float(row["snr_db"]),
            label=label,
            seed=int(row["seed"]) if int(row["seed"]) >= 0 else None,
        ).validate()
        windows.append(window)
    return windows


def load_external(path, manifest=None):
    """
    Load recordings described by a manifest into a LabeledDataset.

    Files that fail validation are skipped and reported instead of raising.

    Args:
        path (str/Path): root directory of the recordings
        manifest: manifest path/DataFrame/list (default <path>/manifest.csv)

    Returns:
        LabeledDataset: accepted windows; .rejections lists
            {'file': str, 'reason': str} for every rejected file
    """
    root = Path(path)
    frame = read_manifest(manifest if manifest is not None else root / MANIFEST_FILENAME)

    items = []
    rejections = []
    for row in frame.to_dict(orient="records"):
        try:
            windows = _windows_from_file(row, root)
        except (ValidationError, SignalError, OSError) as e:
            rejections.append({"file": str(row["file"]), "reason": str(e)})
            logger.warning("Rejected %s: %s", row["file"], e)
            continue
        seed = int(row["seed"])
        for window in windows:
            items.append(DatasetItem(
                data=window,
                label=window.label,
                snr_db=float(row["snr_db"]),
                seed=seed,
                split=str(row["split"]),
            ))

    manifest_counts = {}
    for item in items:
        manifest_counts[item.label] = manifest_counts.get(item.label, 0) + 1
    return LabeledDataset(items=items, split="all", manifest=manifest_counts, rejections=rejections)
