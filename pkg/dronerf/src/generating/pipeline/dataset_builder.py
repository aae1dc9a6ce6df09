"""
Labeled dataset construction.

Builds balanced, SNR-stratified sets of windows for every requested class.
Each window has its own seed derived from (dataset seed, class index, window
index), so the result does not depend on worker count or synthesis order.
"""

from collections import Counter
from dataclasses import dataclass, field, replace

import numpy as np
from joblib import Parallel, delayed
from tqdm import tqdm

from dronerf.src.errors import ConfigurationError, ValidationError
from dronerf.src.generating.config.config import (
    CLASS_LABELS,
    DEFAULT_SPLITS,
    INTERFERENCE_PROBABILITY,
    INTERFERENCE_TO_NOISE_DB,
    NOISE_LABEL,
    SAMPLE_RATE_HZ,
    WINDOW_LENGTH,
)
from dronerf.src.generating.signals.burst_synthesizer import synth_burst
from dronerf.src.generating.signals.emitter_profile import PROFILES, ChannelSpec
from dronerf.src.generating.signals.interference_synthesizer import (
    synth_interference,
    synth_noise_window,
)
from dronerf.src.generating.signals.snr_mixer import mix_to_snr
from dronerf.src.utils.run_logger import get_logger
from dronerf.src.utils.seeding import derive_seed, rng_for


logger = get_logger(__name__)


@dataclass(frozen=True)
class DatasetItem:
    data: object          # IQWindow or Spectrogram
    label: str
    snr_db: float
    seed: int
    split: str


@dataclass
class LabeledDataset:
    """
    Windows (or spectrograms) with labels, SNRs and split tags.

    Attributes:
        items (list): DatasetItem entries
        split (str): 'all' for a full build, otherwise the split name
        manifest (dict): label -> expected count for this dataset
        rejections (list): {'file', 'reason'} entries from external ingestion
    """
    items: list
    split: str = "all"
    manifest: dict = field(default_factory=dict)
    rejections: list = field(default_factory=list)

    def __len__(self):
        return len(self.items)

    def __iter__(self):
        return iter(self.items)

    @property
    def labels(self):
        return [item.label for item in self.items]

    @property
    def snrs(self):
        return np.array([item.snr_db for item in self.items], dtype=float)

    @property
    def classes(self):
        return sorted(set(self.labels), key=_label_order)

    def counts(self):
        """Actual per-label counts."""
        return dict(Counter(self.labels))

    def subset(self, split):
        """Items tagged with one split, as their own dataset."""
        items = [item for item in self.items if item.split == split]
        return LabeledDataset(items=items, split=split, manifest=dict(Counter(i.label for i in items)))

    def select(self, labels):
        """Items whose label is in labels (split tag kept)."""
        wanted = set(labels)
        items = [item for item in self.items if item.label in wanted]
        return LabeledDataset(items=items, split=self.split, manifest=dict(Counter(i.label for i in items)))

    def map_data(self, fn):
        """New dataset with fn applied to every item's data."""
        return replace(self, items=[replace(item, data=fn(item.data)) for item in self.items])

    def label_indices(self, classes):
        """Integer targets for a fixed class order."""
        index = {label: i for i, label in enumerate(classes)}
        try:
            return np.array([index[label] for label in self.labels], dtype=np.int64)
        except KeyError as e:
            raise ValidationError(f"Label {e.args[0]!r} not in class list {list(classes)}") from e

    def verify(self):
        """
        Check manifest counts and split disjointness.

        Raises:
            ValidationError: counts differ from the manifest, or a window
                seed appears under two split tags
        """
        if self.counts() != dict(self.manifest):
            raise ValidationError(f"Manifest {self.manifest} does not match counts {self.counts()}")
        seen = {}
        for item in self.items:
            if item.seed is None or item.seed < 0:
                continue
            key = (item.label, item.seed)
            if key in seen and seen[key] != item.split:
                raise ValidationError(f"Window {key} appears in splits {seen[key]} and {item.split}")
            seen[key] = item.split
        return self


@dataclass(frozen=True)
class DatasetSpec:
    per_class_count: int
    snr_grid: tuple
    seed: int = 0
    splits: dict = field(default_factory=lambda: dict(DEFAULT_SPLITS))
    classes: tuple = tuple(CLASS_LABELS)
    interference_probability: float = INTERFERENCE_PROBABILITY
    interference_to_noise_db: tuple = INTERFERENCE_TO_NOISE_DB
    duty_cycle: float = 1.0
    workers: int = 1

    @classmethod
    def from_dict(cls, config):
        if isinstance(config, cls):
            return config
        known = {k: v for k, v in dict(config).items() if k in cls.__dataclass_fields__}
        if "snr_grid" in known:
            known["snr_grid"] = tuple(known["snr_grid"])
        if "classes" in known:
            known["classes"] = tuple(known["classes"])
        if "interference_to_noise_db" in known:
            known["interference_to_noise_db"] = tuple(known["interference_to_noise_db"])
        return cls(**known)

    def validate(self):
        if int(self.per_class_count) <= 0:
            raise ValidationError(f"per_class_count must be > 0, got {self.per_class_count}")
        if len(self.snr_grid) == 0:
            raise ValidationError("SNR grid is empty")
        unknown = [c for c in self.classes if c not in CLASS_LABELS]
        if unknown:
            raise ConfigurationError(f"Unknown class labels: {unknown}")
        if len(set(self.classes)) != len(self.classes):
            raise ConfigurationError("Duplicate class labels in dataset config")
        if not self.splits or any(v < 0 for v in self.splits.values()):
            raise ConfigurationError(f"Invalid splits: {self.splits}")
        if not np.isclose(sum(self.splits.values()), 1.0):
            raise ConfigurationError(f"Split fractions must sum to 1, got {self.splits}")
        if not (0.0 <= self.interference_probability <= 1.0):
            raise ConfigurationError("interference_probability must be in [0, 1]")
        if not (0.0 < self.duty_cycle <= 1.0):
            raise ConfigurationError("duty_cycle must be in (0, 1]")
        return self


def _label_order(label):
    return CLASS_LABELS.index(label) if label in CLASS_LABELS else len(CLASS_LABELS)


def split_counts(n, splits):
    """
    Integer sizes per split, summing to n.

    Every split but the last is rounded; the last takes the remainder.

    Example:
        >>> split_counts(250, {'train': 0.8, 'test': 0.2})
        {'train': 200, 'test': 50}
    """
    names = list(splits)
    sizes = {}
    used = 0
    for name in names[:-1]:
        sizes[name] = int(round(n * splits[name]))
        used += sizes[name]
    sizes[names[-1]] = n - used
    if sizes[names[-1]] < 0:
        raise ConfigurationError(f"Split fractions {splits} overflow {n} windows")
    return sizes


def plan_class(spec, label):
    """
    Per-window plan (snr, seed, split) for one class.

    The SNR grid is cycled to per_class_count entries and shuffled, so every
    (class, SNR) cell gets floor or ceil of per_class_count / len(grid).
    """
    class_index = CLASS_LABELS.index(label)
    n = int(spec.per_class_count)
    rng = rng_for(spec.seed, class_index)

    snrs = np.resize(np.asarray(spec.snr_grid, dtype=float), n)
    rng.shuffle(snrs)

    order = rng.permutation(n)
    tags = np.empty(n, dtype=object)
    cursor = 0
    for name, size in split_counts(n, spec.splits).items():
        tags[order[cursor:cursor + size]] = name
        cursor += size

    return [
        (label, float(snrs[i]), derive_seed(spec.seed, class_index, i + 1), str(tags[i]))
        for i in range(n)
    ]


def synthesize_item(label, snr_db, seed, split, spec):
    """Synthesize and mix one labeled window."""
    window_spec = {"length": WINDOW_LENGTH, "sample_rate": SAMPLE_RATE_HZ}
    rng = rng_for(seed, 0)

    if label == NOISE_LABEL:
        clean = synth_noise_window(window_spec, derive_seed(seed, 1))
        interference = None
    else:
        gain = np.exp(1j * rng.uniform(0.0, 2.0 * np.pi))
        clean = synth_burst(
            PROFILES[label], ChannelSpec(gain=gain), window_spec,
            rng_seed=derive_seed(seed, 1), duty_cycle=spec.duty_cycle,
        )
        interference = None
        if rng.random() < spec.interference_probability:
            interference = synth_interference(window_spec, derive_seed(seed, 2))

    low, high = spec.interference_to_noise_db
    inr = float(rng.uniform(low, high))
    mixed = mix_to_snr(clean, interference, snr_db, derive_seed(seed, 3), interference_to_noise_db=inr)
    mixed.seed = int(seed)
    return DatasetItem(data=mixed, label=label, snr_db=float(snr_db), seed=int(seed), split=split)


def build_dataset(config, show_progress=False):
    """
    Build a balanced labeled dataset.

    Args:
        config (dict or DatasetSpec): per_class_count, snr_grid, seed, splits,
            plus optional classes, interference_probability,
            interference_to_noise_db, duty_cycle, workers
        show_progress (bool): tqdm bar over windows

    Returns:
        LabeledDataset: split 'all'; every item carries its split tag

    Raises:
        ValidationError: per_class_count <= 0 or empty SNR grid
        ConfigurationError: unknown label or inconsistent splits

    Example:
        >>> ds = build_dataset({'per_class_count': 10, 'snr_grid': [0, 10], 'seed': 1})
        >>> len(ds), len(ds.subset('train'))
        (70, 56)
    """
    spec = DatasetSpec.from_dict(config).validate()

    plan = []
    for label in spec.classes:
        plan.extend(plan_class(spec, label))

    jobs = (delayed(synthesize_item)(label, snr, seed, split, spec)
            for label, snr, seed, split in plan)
    if show_progress:
        jobs = tqdm(jobs, total=len(plan), desc="Synthesizing windows")

    items = Parallel(n_jobs=max(1, int(spec.workers)))(jobs)

    manifest = {label: int(spec.per_class_count) for label in spec.classes}
    dataset = LabeledDataset(items=list(items), split="all", manifest=manifest)
    logger.info("Built dataset: %d windows, classes=%s", len(dataset), list(spec.classes))
    return dataset.verify()
