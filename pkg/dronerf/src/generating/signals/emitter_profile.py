"""
Emitter profiles, channel specs and IQ windows.

Profiles are loaded once from emitter_profiles.json. Each profile carries the
timing/frequency parameters of one remote-control transmitter plus the
synthetic burst shape used to stand in for its waveform.
"""

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from dronerf.src.errors import ConfigurationError, ValidationError
from dronerf.src.generating.config.config import (
    CLASS_LABELS,
    CLEAN_SNR,
    NOISE_LABEL,
    NOISE_ONLY_LABEL,
    RECEIVER_CENTER_HZ,
    SAMPLE_RATE_HZ,
    WINDOW_LENGTH,
)


# Load emitter table (loaded once at module import)
_profiles_path = Path(__file__).resolve().parent.parent / "config" / "emitter_profiles.json"

with open(_profiles_path, 'r', encoding='utf-8') as f:
    EMITTER_TABLE = json.load(f)

MODULATION_KINDS = (
    "binary_pm",
    "gaussian_pm",
    "multilevel_pm",
    "sine_pm",
    "pulsed_pm",
    "wifi_ofdm",
    "bluetooth_gfsk",
)


@dataclass(frozen=True)
class RepetitionInterval:
    """Discrete repetition values plus an optional continuous range (seconds)."""
    values: tuple = ()
    range: tuple = None

    @property
    def minimum(self):
        candidates = list(self.values)
        if self.range is not None:
            candidates.append(self.range[0])
        return min(candidates) if candidates else None

    def sample(self, rng):
        """
        Pick a repetition interval.

        Each listed value and the range (if any) are equally likely; a value
        inside the range is drawn uniformly.
        """
        options = len(self.values) + (1 if self.range is not None else 0)
        if options == 0:
            return None
        pick = int(rng.integers(options))
        if pick < len(self.values):
            return float(self.values[pick])
        low, high = self.range
        return float(rng.uniform(low, high))


@dataclass(frozen=True)
class EmitterProfile:
    label: str
    center_freq_hz: float
    channel_spacing_hz: float
    channel_count: int
    burst_durations_s: tuple
    repetition: RepetitionInterval
    bandwidth_hz: float
    symbol_rate_hz: float
    phase_deviation_rad: float
    modulation_kind: str

    @property
    def center_offset_hz(self):
        return self.center_freq_hz - RECEIVER_CENTER_HZ

    def channel_offset_hz(self, k):
        """Baseband offset of channel index k (k in -channel_count..channel_count)."""
        return self.center_offset_hz + k * self.channel_spacing_hz

    @property
    def max_offset_hz(self):
        return abs(self.center_offset_hz) + self.channel_count * self.channel_spacing_hz

    def validate(self, sample_rate=SAMPLE_RATE_HZ):
        """
        Check profile invariants.

        Raises:
            ValidationError: non-positive durations or repetition shorter
                than a burst
            ConfigurationError: unknown label/modulation or channel plan
                outside the Nyquist band
        """
        if self.label not in CLASS_LABELS or self.label == NOISE_LABEL:
            raise ConfigurationError(f"Not a drone class label: {self.label!r}")
        if self.modulation_kind not in MODULATION_KINDS:
            raise ConfigurationError(f"Unknown modulation kind: {self.modulation_kind!r}")
        if not self.burst_durations_s or min(self.burst_durations_s) <= 0:
            raise ValidationError(f"{self.label}: burst durations must be > 0")
        rep_min = self.repetition.minimum
        if rep_min is None or rep_min < max(self.burst_durations_s):
            raise ValidationError(
                f"{self.label}: repetition interval must be >= burst duration"
            )
        if self.channel_count < 0 or self.channel_spacing_hz < 0:
            raise ConfigurationError(f"{self.label}: negative channel plan")
        if self.max_offset_hz >= sample_rate / 2:
            raise ConfigurationError(
                f"{self.label}: max channel offset {self.max_offset_hz / 1e6:.3f} MHz "
                f"outside Nyquist band of {sample_rate / 1e6:.1f} MHz"
            )
        return self


@dataclass(frozen=True)
class ChannelSpec:
    """
    Flat channel: a complex gain and an optional power path-loss factor.

    The synthesized amplitude is scaled by gain * sqrt(path_loss).
    """
    gain: complex = 1.0 + 0.0j
    path_loss: float = 1.0
    receiver_center_hz: float = RECEIVER_CENTER_HZ

    def __post_init__(self):
        if not np.isfinite(complex(self.gain)):
            raise ValidationError("Channel gain must be finite")
        if not (self.path_loss >= 0):
            raise ValidationError("Path-loss factor must be >= 0")

    @property
    def amplitude(self):
        return complex(self.gain) * np.sqrt(self.path_loss)


@dataclass
class IQWindow:
    samples: np.ndarray
    sample_rate: float = SAMPLE_RATE_HZ
    snr_db: object = CLEAN_SNR
    label: str = NOISE_ONLY_LABEL
    channel_offset_hz: float = None
    burst_support: list = field(default_factory=list)
    seed: int = None
    modulation_kind: str = None

    @property
    def power(self):
        return float(np.mean(np.abs(self.samples.astype(np.complex128)) ** 2))

    def validate(self, strict_length=True):
        """
        Enforce the window contract.

        Args:
            strict_length (bool): require exactly WINDOW_LENGTH samples at
                SAMPLE_RATE_HZ

        Raises:
            ValidationError
        """
        if self.samples.ndim != 1:
            raise ValidationError("IQ window must be one-dimensional")
        if strict_length and (
            self.samples.shape[0] != WINDOW_LENGTH or self.sample_rate != SAMPLE_RATE_HZ
        ):
            raise ValidationError(
                f"IQ window must hold {WINDOW_LENGTH} samples at "
                f"{SAMPLE_RATE_HZ / 1e6:.0f} MHz, got {self.samples.shape[0]} at "
                f"{self.sample_rate / 1e6:.1f} MHz"
            )
        if not np.all(np.isfinite(self.samples)):
            raise ValidationError("IQ window contains non-finite samples")
        if self.label not in CLASS_LABELS and self.label != NOISE_ONLY_LABEL:
            raise ValidationError(f"Unknown window label: {self.label!r}")
        return self


def _profile_from_entry(label, entry):
    rep = entry["repetition_interval_s"]
    return EmitterProfile(
        label=label,
        center_freq_hz=float(entry["center_freq_hz"]),
        channel_spacing_hz=float(entry["channel_spacing_hz"]),
        channel_count=int(entry["channel_count"]),
        burst_durations_s=tuple(float(d) for d in entry["burst_durations_s"]),
        repetition=RepetitionInterval(
            values=tuple(float(v) for v in rep.get("values", [])),
            range=tuple(float(v) for v in rep["range"]) if "range" in rep else None,
        ),
        bandwidth_hz=float(entry["bandwidth_hz"]),
        symbol_rate_hz=float(entry["symbol_rate_hz"]),
        phase_deviation_rad=float(entry["phase_deviation_rad"]),
        modulation_kind=entry["modulation_kind"],
    )


def load_profiles(table=None):
    """
    Build validated EmitterProfile objects for every drone class.

    Args:
        table (dict): emitter table with the same layout as
            emitter_profiles.json (default: the bundled table)

    Returns:
        dict: label -> EmitterProfile
    """
    table = table or EMITTER_TABLE
    profiles = {}
    for label, entry in table["profiles"].items():
        profiles[label] = _profile_from_entry(label, entry).validate()
    return profiles


def get_profile(label):
    """Return the bundled profile for one drone class."""
    entry = EMITTER_TABLE["profiles"].get(label)
    if entry is None:
        raise ConfigurationError(f"No emitter profile for label {label!r}")
    return _profile_from_entry(label, entry).validate()


PROFILES = load_profiles()
NOISE_SETTINGS = EMITTER_TABLE["noise"]
PULSED_SETTINGS = EMITTER_TABLE["pulsed"]
