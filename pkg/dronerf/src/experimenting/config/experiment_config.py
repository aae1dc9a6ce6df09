"""
Declarative experiment configuration.

An experiment is a YAML file with the sections dataset, split, model, loss,
optimizer, federated, evaluation, seeds, output and sweep. It is parsed into
frozen dataclasses and validated before any compute starts. Unknown keys are
rejected so a typo never silently falls back to a default.

Example:
    name: fed-m-sweep
    mode: federated
    dataset: {per_class: 250, snr_grid: [-10, 0, 10]}
    split: {unknown: [Noise, Taranis]}
    federated: {n_clients: 5, rounds: 50}
    sweep: {key: federated.clients_per_round, values: [1, 2, 3, 4, 5]}
"""

import copy
import hashlib
import json
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

import yaml

from dronerf.src.database.connection import DEFAULT_OUTPUT_ROOT
from dronerf.src.errors import ConfigurationError, ValidationError
from dronerf.src.experimenting.config.config import (
    ALL_CLIENTS,
    CENTRAL_EPOCHS,
    DATA_SOURCES,
    DEFAULT_KNOWN,
    DEFAULT_UNKNOWN,
    DESK_GRID,
    DESK_PER_CLASS,
    MIN_KNOWN_CLASSES,
    MODES,
    RUN_ID_HASH_LENGTH,
    TRUE_ACCEPT_RATE,
    UNKNOWN_ORDER,
    VALIDATION_SPLIT,
)
from dronerf.src.federating.config.config import (
    CLIENTS_PER_ROUND,
    EVAL_EVERY,
    LOCAL_EPOCHS,
    MIN_SHARD_PER_CLASS,
    N_CLIENTS,
    NORM_BOUND_FACTOR,
    ROUNDS,
)
from dronerf.src.federating.pipeline.orchestrator import FederationConfig
from dronerf.src.generating.config.config import (
    CLASS_LABELS,
    DEFAULT_SPLITS,
    FULL_SNR_GRID,
    INTERFERENCE_PROBABILITY,
)
from dronerf.src.generating.pipeline.dataset_builder import DatasetSpec
from dronerf.src.modeling.loss.class_anchor import DEFAULT_ALPHA, DEFAULT_LAMBDA, SCORE_KINDS
from dronerf.src.modeling.lsnet.config import LSNetConfig
from dronerf.src.modeling.training.sgd_trainer import (
    BATCH_SIZE,
    CENTRAL_LR,
    FEDERATED_LR,
    TrainingConfig,
)
from dronerf.src.preprocessing.spectrogram_transformer import SpectrogramParams


def _section(cls, data, name):
    """Build a section dataclass, rejecting keys it does not define."""
    if isinstance(data, cls):
        return data
    data = dict(data or {})
    allowed = {f.name for f in fields(cls)}
    extra = sorted(set(data) - allowed)
    if extra:
        raise ConfigurationError(f"Unknown keys in '{name}': {extra}; allowed: {sorted(allowed)}")
    return cls(**data)


@dataclass(frozen=True)
class DatasetSection:
    source: str = "synthetic"
    path: str = None
    manifest: str = None
    per_class: int = DESK_PER_CLASS
    snr_grid: tuple = tuple(DESK_GRID)
    full_grid: bool = False
    splits: dict = field(default_factory=lambda: dict(DEFAULT_SPLITS))
    interference_probability: float = INTERFERENCE_PROBABILITY
    duty_cycle: float = 1.0
    workers: int = 1
    window_fn: str = "hann"
    input_channels: int = 1
    cache: bool = False

    def __post_init__(self):
        object.__setattr__(self, "snr_grid", tuple(float(s) for s in self.snr_grid))

    @property
    def grid(self):
        return list(FULL_SNR_GRID) if self.full_grid else list(self.snr_grid)


@dataclass(frozen=True)
class SplitSection:
    known: tuple = None
    unknown: tuple = None
    unknown_count: int = None

    def resolve(self):
        """
        (known, unknown) label lists in canonical class order.

        Explicit lists win over unknown_count; with neither, the default
        five-known/two-unknown split applies.
        """
        if self.known is None and self.unknown is None:
            if self.unknown_count is None:
                return list(DEFAULT_KNOWN), list(DEFAULT_UNKNOWN)
            n = int(self.unknown_count)
            if not 0 <= n <= len(UNKNOWN_ORDER):
                raise ConfigurationError(f"unknown_count must be in [0, {len(UNKNOWN_ORDER)}], got {n}")
            unknown = UNKNOWN_ORDER[:n]
            known = [label for label in CLASS_LABELS if label not in unknown]
        elif self.known is None:
            unknown = list(self.unknown)
            known = [label for label in CLASS_LABELS if label not in unknown]
        else:
            known = list(self.known)
            unknown = list(self.unknown or [])
        return _ordered(known), _ordered(unknown)


def _ordered(labels):
    return sorted(labels, key=lambda label: CLASS_LABELS.index(label) if label in CLASS_LABELS else -1)


@dataclass(frozen=True)
class LossSection:
    alpha: float = DEFAULT_ALPHA
    lam: float = DEFAULT_LAMBDA


@dataclass(frozen=True)
class OptimizerSection:
    lr: float = None
    batch_size: int = BATCH_SIZE
    epochs: int = CENTRAL_EPOCHS


@dataclass(frozen=True)
class FederatedSection:
    n_clients: int = N_CLIENTS
    clients_per_round: int = CLIENTS_PER_ROUND
    rounds: int = ROUNDS
    local_epochs: int = LOCAL_EPOCHS
    eval_every: int = EVAL_EVERY
    norm_factor: float = NORM_BOUND_FACTOR
    norm_bound: float = None
    workers: int = 1
    min_shard_per_class: int = MIN_SHARD_PER_CLASS
    behaviours: dict = field(default_factory=dict)


@dataclass(frozen=True)
class EvaluationSection:
    score_kind: str = "distance"
    calibrate: bool = False
    true_accept_rate: float = TRUE_ACCEPT_RATE
    per_round: bool = True


@dataclass(frozen=True)
class SeedsSection:
    master: int = 0
    data: int = None

    @property
    def data_seed(self):
        return int(self.master if self.data is None else self.data)


@dataclass(frozen=True)
class OutputSection:
    root: str = None
    checkpoints: bool = True

    @property
    def root_path(self):
        return Path(self.root) if self.root else DEFAULT_OUTPUT_ROOT


@dataclass(frozen=True)
class SweepSection:
    key: str = None
    values: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "values", tuple(self.values or ()))


SECTIONS = {
    "dataset": DatasetSection,
    "split": SplitSection,
    "loss": LossSection,
    "optimizer": OptimizerSection,
    "federated": FederatedSection,
    "evaluation": EvaluationSection,
    "seeds": SeedsSection,
    "output": OutputSection,
    "sweep": SweepSection,
}

TOP_LEVEL_KEYS = {"name", "mode", "model", *SECTIONS}


@dataclass(frozen=True)
class ExperimentConfig:
    name: str = "experiment"
    mode: str = "centralized"
    dataset: DatasetSection = field(default_factory=DatasetSection)
    split: SplitSection = field(default_factory=SplitSection)
    model: dict = field(default_factory=dict)
    loss: LossSection = field(default_factory=LossSection)
    optimizer: OptimizerSection = field(default_factory=OptimizerSection)
    federated: FederatedSection = field(default_factory=FederatedSection)
    evaluation: EvaluationSection = field(default_factory=EvaluationSection)
    seeds: SeedsSection = field(default_factory=SeedsSection)
    output: OutputSection = field(default_factory=OutputSection)
    sweep: SweepSection = field(default_factory=SweepSection)

    # ------------------------------------------------------------------
    # construction
    # ------------------------------------------------------------------

    @classmethod
    def from_dict(cls, data):
        if isinstance(data, cls):
            return data
        data = dict(data or {})
        extra = sorted(set(data) - TOP_LEVEL_KEYS)
        if extra:
            raise ConfigurationError(f"Unknown top-level keys: {extra}; allowed: {sorted(TOP_LEVEL_KEYS)}")
        kwargs = {name: _section(section, data.get(name), name) for name, section in SECTIONS.items()}
        return cls(
            name=str(data.get("name", "experiment")),
            mode=str(data.get("mode", "centralized")),
            model=dict(data.get("model") or {}),
            **kwargs,
        )

    def to_dict(self):
        data = asdict(self)
        for section in ("dataset", "sweep"):
            for key, value in data[section].items():
                if isinstance(value, tuple):
                    data[section][key] = list(value)
        for key in ("known", "unknown"):
            if data["split"][key] is not None:
                data["split"][key] = list(data["split"][key])
        data["federated"]["behaviours"] = {int(k): v for k, v in data["federated"]["behaviours"].items()}
        return data

    def with_override(self, dotted_key, value):
        """
        Copy with one dotted key replaced, e.g. ('federated.rounds', 10).

        Raises:
            ConfigurationError: the key does not name a config field
        """
        data = copy.deepcopy(self.to_dict())
        parts = dotted_key.split(".")
        target = data
        for part in parts[:-1]:
            if not isinstance(target.get(part), dict):
                raise ConfigurationError(f"Unknown config key {dotted_key!r}")
            target = target[part]
        leaf = parts[-1]
        if leaf not in target and parts[0] != "model":
            raise ConfigurationError(f"Unknown config key {dotted_key!r}")
        target[leaf] = value
        return ExperimentConfig.from_dict(data)

    def expand_sweep(self):
        """
        One config per sweep value, each without a sweep of its own.

        Returns:
            list: (value, ExperimentConfig) pairs
        """
        if not self.sweep.key:
            return [(None, self)]
        leaf = self.sweep.key.split(".")[-1]
        base = replace(self, sweep=SweepSection())
        children = []
        for value in self.sweep.values:
            child = base.with_override(self.sweep.key, value)
            children.append((value, replace(child, name=f"{self.name}-{leaf}={value}")))
        return children

    # ------------------------------------------------------------------
    # identity
    # ------------------------------------------------------------------

    @property
    def config_hash(self):
        """sha256 over the canonical JSON form, ignoring where outputs go."""
        data = self.to_dict()
        data.pop("output")
        blob = json.dumps(data, sort_keys=True, default=str).encode("utf-8")
        return hashlib.sha256(blob).hexdigest()

    @property
    def run_id(self):
        return f"{self.name}-{self.config_hash[:RUN_ID_HASH_LENGTH]}"

    # ------------------------------------------------------------------
    # derived settings
    # ------------------------------------------------------------------

    @property
    def classes(self):
        """(known, unknown) label lists."""
        return self.split.resolve()

    @property
    def learning_rate(self):
        if self.optimizer.lr is not None:
            return float(self.optimizer.lr)
        return FEDERATED_LR if self.mode == "federated" else CENTRAL_LR

    def dataset_spec(self):
        known, unknown = self.classes
        return DatasetSpec.from_dict({
            "per_class_count": self.dataset.per_class,
            "snr_grid": self.dataset.grid,
            "seed": self.seeds.data_seed,
            "splits": dict(self.dataset.splits),
            "classes": _ordered(known + unknown),
            "interference_probability": self.dataset.interference_probability,
            "duty_cycle": self.dataset.duty_cycle,
            "workers": self.dataset.workers,
        })

    def spectrogram_params(self):
        return SpectrogramParams.from_dict({
            "window_fn": self.dataset.window_fn,
            "input_channels": self.dataset.input_channels,
        })

    def lsnet_config(self):
        known, _ = self.classes
        data = dict(self.model)
        data["num_classes"] = len(known)
        data.setdefault("input_channels", self.dataset.input_channels)
        return LSNetConfig.from_dict(data)

    def training_config(self):
        return TrainingConfig(
            epochs=self.optimizer.epochs,
            lr=self.learning_rate,
            batch_size=self.optimizer.batch_size,
            alpha=self.loss.alpha,
            lam=self.loss.lam,
        )

    def federation_config(self):
        data = asdict(self.federated)
        if data["clients_per_round"] == ALL_CLIENTS:
            data["clients_per_round"] = data["n_clients"]
        data.update(lr=self.learning_rate, batch_size=self.optimizer.batch_size,
                    alpha=self.loss.alpha, lam=self.loss.lam)
        return FederationConfig.from_dict(data)

    # ------------------------------------------------------------------
    # validation
    # ------------------------------------------------------------------

    def validate(self):
        """
        Check the whole configuration before any compute.

        Raises:
            ConfigurationError: out-of-range values or an inconsistent split
            ValidationError: a referenced path does not exist
        """
        if self.mode not in MODES:
            raise ConfigurationError(f"mode must be one of {MODES}, got {self.mode!r}")
        if not self.name or "/" in self.name:
            raise ConfigurationError(f"Invalid experiment name {self.name!r}")

        self._validate_split()
        self._validate_dataset()

        model_keys = set(self.model) - set(LSNetConfig.__dataclass_fields__)
        if model_keys:
            raise ConfigurationError(f"Unknown keys in 'model': {sorted(model_keys)}")
        lsnet = self.lsnet_config().validate()
        if lsnet.input_channels != self.dataset.input_channels:
            raise ConfigurationError(
                f"model.input_channels={lsnet.input_channels} but spectrograms have "
                f"{self.dataset.input_channels} channel(s)"
            )

        self.training_config().validate()
        if self.mode == "federated":
            self.federation_config().validate()

        if self.evaluation.score_kind not in SCORE_KINDS:
            raise ConfigurationError(f"score_kind must be one of {SCORE_KINDS}")
        if not 0.0 < float(self.evaluation.true_accept_rate) <= 1.0:
            raise ConfigurationError("true_accept_rate must be in (0, 1]")
        if self.evaluation.calibrate and VALIDATION_SPLIT not in self.dataset.splits:
            raise ConfigurationError(
                f"evaluation.calibrate needs a '{VALIDATION_SPLIT}' entry in dataset.splits"
            )

        if int(self.seeds.master) < 0 or self.seeds.data_seed < 0:
            raise ConfigurationError("seeds must be >= 0")

        if self.sweep.key:
            if not self.sweep.values:
                raise ConfigurationError(f"sweep over {self.sweep.key!r} has no values")
            for _, child in self.expand_sweep():
                child.validate()
        return self

    def _validate_split(self):
        known, unknown = self.classes
        outside = sorted(set(known + unknown) - set(CLASS_LABELS))
        if outside:
            raise ConfigurationError(f"Unknown class labels {outside}; expected a subset of {CLASS_LABELS}")
        overlap = sorted(set(known) & set(unknown))
        if overlap:
            raise ConfigurationError(f"Classes {overlap} are both known and unknown")
        if len(set(known)) != len(known) or len(set(unknown)) != len(unknown):
            raise ConfigurationError("Duplicate labels in split")
        if len(known) < MIN_KNOWN_CLASSES:
            raise ConfigurationError(f"Need at least {MIN_KNOWN_CLASSES} known classes, got {known}")

    def _validate_dataset(self):
        if self.dataset.source not in DATA_SOURCES:
            raise ConfigurationError(f"dataset.source must be one of {DATA_SOURCES}")
        if self.dataset.source == "external":
            if not self.dataset.path:
                raise ConfigurationError("dataset.path is required for external data")
            if not Path(self.dataset.path).is_dir():
                raise ValidationError(f"Dataset directory not found: {self.dataset.path}")
            if self.dataset.manifest and not Path(self.dataset.manifest).is_file():
                raise ValidationError(f"Manifest not found: {self.dataset.manifest}")
        else:
            self.dataset_spec().validate()
        for name in ("train", "test"):
            if name not in self.dataset.splits:
                raise ConfigurationError(f"dataset.splits needs a '{name}' entry")
        self.spectrogram_params().validate()


def load_config(path, overrides=None):
    """
    Read and validate an experiment YAML file.

    Args:
        path (str/Path): YAML file
        overrides (dict): dotted key -> value applied before validation

    Returns:
        ExperimentConfig

    Raises:
        ValidationError: missing file or unparseable YAML
        ConfigurationError: invalid values
    """
    path = Path(path)
    if not path.is_file():
        raise ValidationError(f"Config file not found: {path}")
    try:
        with open(path, "r", encoding="utf-8") as f:
            data = yaml.safe_load(f) or {}
    except yaml.YAMLError as e:
        raise ValidationError(f"Cannot parse {path}: {e}") from e
    if not isinstance(data, dict):
        raise ValidationError(f"{path} must hold a mapping at the top level")

    config = ExperimentConfig.from_dict(data)
    for key, value in (overrides or {}).items():
        config = config.with_override(key, value)
    return config.validate()


def save_config(config, path):
    """Write a config snapshot that load_config reads back to an equal config."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        yaml.safe_dump(config.to_dict(), f, sort_keys=False)
    return path
