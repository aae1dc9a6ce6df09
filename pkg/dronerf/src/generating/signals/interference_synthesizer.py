"""
WiFi-like and Bluetooth-like emissions.

The Noise class and the interference mixed into drone windows are both built
from these two parametric burst families:

    - wideband bursts: band-limited complex Gaussian noise (~10 MHz) with a
      small random center jitter
    - narrowband hopping bursts: 1 MHz GFSK packets on a random 1 MHz channel
      per 625 us slot
"""

import numpy as np
import scipy.fft as sfft
from scipy.ndimage import gaussian_filter1d

from dronerf.src.errors import ValidationError
from dronerf.src.generating.config.config import (
    CLEAN_SNR,
    NOISE_LABEL,
    NOISE_ONLY_LABEL,
    SAMPLE_RATE_HZ,
    WINDOW_LENGTH,
)
from dronerf.src.generating.signals.emitter_profile import IQWindow, NOISE_SETTINGS


def wifi_burst(length, sample_rate, rng, settings=None):
    """
    One band-limited wideband burst with unit average power.

    Args:
        length (int): burst length in samples
        sample_rate (float): Hz
        rng (np.random.Generator): randomness source
        settings (dict): 'wifi' block of the emitter table

    Returns:
        tuple: (complex128 samples, center offset in Hz)
    """
    settings = settings or NOISE_SETTINGS["wifi"]
    bandwidth = min(settings["bandwidth_hz"], 0.95 * sample_rate)
    room = max(sample_rate / 2 - bandwidth / 2, 0.0)
    jitter = min(settings["center_jitter_hz"], room)
    center = float(rng.uniform(-jitter, jitter))

    white = rng.standard_normal(length) + 1j * rng.standard_normal(length)
    spectrum = sfft.fft(white)
    freqs = sfft.fftfreq(length, d=1.0 / sample_rate)
    spectrum[np.abs(freqs - center) > bandwidth / 2] = 0.0
    burst = sfft.ifft(spectrum)

    power = np.mean(np.abs(burst) ** 2)
    if power > 0:
        burst /= np.sqrt(power)
    return burst, center


def gfsk_burst(length, sample_rate, offset_hz, rng, settings=None):
    """
    One constant-envelope GFSK packet at offset_hz with unit power.

    Args:
        length (int): packet length in samples
        sample_rate (float): Hz
        offset_hz (float): hop channel offset from the receiver center
        rng (np.random.Generator): randomness source
        settings (dict): 'bluetooth' block of the emitter table

    Returns:
        np.ndarray: complex128 samples
    """
    settings = settings or NOISE_SETTINGS["bluetooth"]
    symbol_rate = settings["symbol_rate_hz"]
    sps = sample_rate / symbol_rate
    idx = np.floor(np.arange(length) / sps).astype(np.int64)
    symbols = rng.choice([-1.0, 1.0], size=int(idx[-1]) + 1 if length else 0)

    sigma = np.sqrt(np.log(2.0)) / (2.0 * np.pi * settings["gaussian_bt"]) * sps
    freq = gaussian_filter1d(symbols[idx], sigma, mode="nearest") if length else np.zeros(0)
    phase = np.pi * settings["modulation_index"] * np.cumsum(freq) / sps

    t = np.arange(length) / sample_rate
    start_phase = rng.uniform(0.0, 2.0 * np.pi)
    return np.exp(1j * (2.0 * np.pi * offset_hz * t + phase + start_phase))


def _place_wifi(samples, support, sample_rate, rng, settings):
    length = samples.size
    low_s, high_s = settings["burst_duration_range_s"]
    duration = int(round(rng.uniform(low_s, high_s) * sample_rate))
    duration = int(np.clip(duration, 1, length))
    start = int(rng.integers(0, length - duration + 1))
    burst, _ = wifi_burst(duration, sample_rate, rng, settings)
    gain = 10 ** (rng.uniform(-3.0, 3.0) / 20)
    samples[start:start + duration] += gain * burst
    support.append((start, start + duration))


def _place_bluetooth(samples, support, sample_rate, rng, settings):
    length = samples.size
    slot = int(round(settings["slot_s"] * sample_rate))
    packet = int(round(settings["burst_s"] * sample_rate))
    n_hops = int(settings["hop_span_hz"] // settings["hop_spacing_hz"])
    first_slot = -int(rng.integers(0, slot))

    placed = 0
    for slot_start in range(first_slot, length, slot):
        if rng.random() >= 0.5:
            continue
        start = max(slot_start, 0)
        stop = min(slot_start + packet, length)
        if stop <= start:
            continue
        hop = int(rng.integers(-n_hops, n_hops + 1)) * settings["hop_spacing_hz"]
        burst = gfsk_burst(stop - start, sample_rate, hop, rng, settings)
        gain = 10 ** (rng.uniform(-3.0, 3.0) / 20)
        samples[start:stop] += gain * burst
        support.append((start, stop))
        placed += 1
    return placed


def synth_emission(window_spec=None, rng_seed=0, label=NOISE_LABEL, settings=None):
    """
    Window of WiFi-like and Bluetooth-like bursts with at least one burst.

    Args:
        window_spec (dict): {'length': int, 'sample_rate': float}
        rng_seed (int): seed for every random draw in this window
        label (str): NOISE_LABEL for the Noise class, NOISE_ONLY_LABEL for
            interference mixed into drone windows
        settings (dict): 'noise' block of the emitter table

    Returns:
        IQWindow: clean window

    Raises:
        ValidationError: bad label or window spec
    """
    if label not in (NOISE_LABEL, NOISE_ONLY_LABEL):
        raise ValidationError(f"Emission label must be Noise or noise-only, got {label!r}")
    window_spec = window_spec or {"length": WINDOW_LENGTH, "sample_rate": SAMPLE_RATE_HZ}
    length = int(window_spec.get("length", WINDOW_LENGTH))
    fs = float(window_spec.get("sample_rate", SAMPLE_RATE_HZ))
    if length <= 0 or fs <= 0:
        raise ValidationError(f"Invalid window spec: {window_spec}")

    settings = settings or NOISE_SETTINGS
    rng = np.random.default_rng(rng_seed)
    samples = np.zeros(length, dtype=np.complex128)
    support = []

    n_wifi = int(rng.integers(0, settings["wifi"]["max_bursts"] + 1))
    for _ in range(n_wifi):
        _place_wifi(samples, support, fs, rng, settings["wifi"])

    use_bluetooth = rng.random() < 0.5
    placed = 0
    if use_bluetooth:
        placed = _place_bluetooth(samples, support, fs, rng, settings["bluetooth"])

    if n_wifi == 0 and placed == 0:
        _place_wifi(samples, support, fs, rng, settings["wifi"])

    return IQWindow(
        samples=samples.astype(np.complex64),
        sample_rate=fs,
        snr_db=CLEAN_SNR,
        label=label,
        burst_support=sorted(support),
        seed=int(rng_seed),
        modulation_kind="wifi_ofdm" if n_wifi or not placed else "bluetooth_gfsk",
    )


def synth_noise_window(window_spec=None, rng_seed=0):
    """Clean window of the Noise class."""
    return synth_emission(window_spec, rng_seed, label=NOISE_LABEL)


def synth_interference(window_spec=None, rng_seed=0):
    """Clean interference window (label 'noise-only') for mixing into drone windows."""
    return synth_emission(window_spec, rng_seed, label=NOISE_ONLY_LABEL)
