"""
Spectrogram transformer for the preprocessing phase.

Turns a 16,384-sample IQ window into a 128x128 log-magnitude image:
non-overlapping 128-sample frames, two-sided FFT with DC centred,
log(1 + |X|), then per-image standardization.

The 2-channel variant keeps the signed-log real and imaginary STFT parts
instead of the magnitude.
"""

from dataclasses import dataclass

import numpy as np
import scipy.fft as sfft
from joblib import Parallel, delayed
from scipy.signal import get_window
from tqdm import tqdm

from dronerf.src.errors import SignalError, ValidationError
from dronerf.src.generating.config.config import SAMPLE_RATE_HZ


FFT_SIZE = 128
HOP = 128
IMAGE_SIZE = 128

WINDOW_FUNCTIONS = {
    "hann": "hann",
    "hamming": "hamming",
    "rect": "boxcar",
}


@dataclass(frozen=True)
class SpectrogramParams:
    fft_size: int = FFT_SIZE
    hop: int = HOP
    window_fn: str = "hann"
    input_channels: int = 1

    def validate(self):
        if self.fft_size != IMAGE_SIZE or self.hop != self.fft_size:
            raise ValidationError(
                f"Only fft_size = hop = {IMAGE_SIZE} yields {IMAGE_SIZE}x{IMAGE_SIZE} images"
            )
        if self.window_fn not in WINDOW_FUNCTIONS:
            raise ValidationError(f"Unknown window function {self.window_fn!r}")
        if self.input_channels not in (1, 2):
            raise ValidationError("input_channels must be 1 or 2")
        return self

    @classmethod
    def from_dict(cls, params):
        if params is None:
            return cls()
        if isinstance(params, cls):
            return params
        return cls(**{k: v for k, v in dict(params).items() if k in cls.__dataclass_fields__})


@dataclass
class Spectrogram:
    """
    Normalized spectrogram image.

    values has shape (128, 128) for magnitude input or (2, 128, 128) for the
    real/imag variant; rows are frequency bins (DC centred), columns frames.
    """
    values: np.ndarray
    freq_axis: np.ndarray
    time_axis: np.ndarray
    label: str = None
    snr_db: object = None
    sample_rate: float = SAMPLE_RATE_HZ
    norm_mean: float = 0.0
    norm_std: float = 1.0
    degenerate: bool = False

    @property
    def channels(self):
        return 1 if self.values.ndim == 2 else self.values.shape[0]

    def as_input(self):
        """(channels, 128, 128) float32 array for the network."""
        values = self.values if self.values.ndim == 3 else self.values[np.newaxis]
        return values.astype(np.float32, copy=False)


def frequency_axis(fft_size=FFT_SIZE, sample_rate=SAMPLE_RATE_HZ):
    return sfft.fftshift(sfft.fftfreq(fft_size, d=1.0 / sample_rate))


def time_axis(n_frames=IMAGE_SIZE, hop=HOP, sample_rate=SAMPLE_RATE_HZ):
    return np.arange(n_frames) * hop / sample_rate


def stft_frames(samples, params):
    """
    Two-sided STFT of non-overlapping frames.

    Returns:
        np.ndarray: complex128 (fft_size, n_frames), frequency rows FFT-shifted
    """
    n = samples.shape[0]
    if n != params.fft_size * IMAGE_SIZE:
        raise ValidationError(
            f"Window length {n} != fft_size x frames = {params.fft_size * IMAGE_SIZE}"
        )
    frames = np.asarray(samples, dtype=np.complex128).reshape(-1, params.hop)
    taper = get_window(WINDOW_FUNCTIONS[params.window_fn], params.fft_size, fftbins=True)
    spectrum = sfft.fft(frames * taper, axis=1)
    return sfft.fftshift(spectrum, axes=1).T


def log_features(samples, params):
    """Pre-normalization features: log1p magnitude, or signed-log real/imag parts."""
    stft = stft_frames(samples, params)
    if params.input_channels == 1:
        return np.log1p(np.abs(stft))
    parts = np.stack([stft.real, stft.imag])
    return np.sign(parts) * np.log1p(np.abs(parts))


def to_spectrogram(iq, params=None):
    """
    Convert one IQ window to a normalized spectrogram.

    Args:
        iq (IQWindow): 16,384-sample window
        params (dict or SpectrogramParams): fft_size, hop, window_fn,
            input_channels

    Returns:
        Spectrogram: zero-mean, unit-variance image; an all-zero window
            yields an all-zero image with degenerate=True

    Raises:
        ValidationError: length mismatch or unsupported parameters
        SignalError: non-finite samples
    """
    params = SpectrogramParams.from_dict(params).validate()
    samples = np.asarray(iq.samples)
    if not np.all(np.isfinite(samples)):
        raise SignalError("Cannot transform non-finite samples")

    features = log_features(samples, params)
    sample_rate = getattr(iq, "sample_rate", SAMPLE_RATE_HZ)

    mean = float(features.mean())
    std = float(features.std())
    degenerate = not np.any(features) or std == 0.0
    if degenerate:
        values = np.zeros_like(features)
        mean, std = 0.0, 0.0
    else:
        values = (features - mean) / std

    return Spectrogram(
        values=values.astype(np.float32),
        freq_axis=frequency_axis(params.fft_size, sample_rate),
        time_axis=time_axis(IMAGE_SIZE, params.hop, sample_rate),
        label=getattr(iq, "label", None),
        snr_db=getattr(iq, "snr_db", None),
        sample_rate=sample_rate,
        norm_mean=mean,
        norm_std=std,
        degenerate=degenerate,
    )


def to_spectrogram_batch(windows, params=None, workers=1, show_progress=False):
    """Convert many windows; order is preserved regardless of workers."""
    params = SpectrogramParams.from_dict(params).validate()
    jobs = (delayed(to_spectrogram)(w, params) for w in windows)
    if show_progress:
        jobs = tqdm(jobs, total=len(windows), desc="Spectrograms")
    return list(Parallel(n_jobs=max(1, int(workers)))(jobs))


def transform_dataset(dataset, params=None, workers=1, show_progress=False):
    """LabeledDataset of IQWindows -> LabeledDataset of Spectrograms."""
    images = to_spectrogram_batch(
        [item.data for item in dataset.items], params, workers, show_progress,
    )
    converted = iter(images)
    return dataset.map_data(lambda _: next(converted))


def stack_inputs(dataset):
    """(N, C, 128, 128) float32 array from a spectrogram dataset."""
    if len(dataset) == 0:
        return np.zeros((0, 1, IMAGE_SIZE, IMAGE_SIZE), dtype=np.float32)
    return np.stack([item.data.as_input() for item in dataset.items])
