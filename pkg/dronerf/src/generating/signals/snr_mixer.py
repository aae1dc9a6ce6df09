"""
Mix a clean window with interference and white noise at a target SNR.

SNR is signal power over total (interference + white noise) power, both
measured as the mean squared magnitude over the full window.
"""

from dataclasses import replace

import numpy as np

from dronerf.src.errors import SignalError, ValidationError


def measured_power(samples):
    """Mean squared magnitude over the whole vector (computed in float64)."""
    return float(np.mean(np.abs(np.asarray(samples, dtype=np.complex128)) ** 2))


def complex_awgn(length, rng):
    """Circular complex white Gaussian noise with unit average power."""
    return (rng.standard_normal(length) + 1j * rng.standard_normal(length)) / np.sqrt(2.0)


def mix_to_snr(signal, interference=None, snr_db=0.0, rng_seed=0,
               interference_to_noise_db=0.0, return_noise=False):
    """
    Add scaled interference plus white noise to a clean window.

    The white noise is drawn first, the interference is scaled to sit
    interference_to_noise_db above it, and then their sum is scaled so that
    measured signal power over measured combined power equals snr_db.

    Args:
        signal (IQWindow): clean window with nonzero power
        interference (IQWindow or None): interference window (same length and
            sample rate); None or zero power means white noise only
        snr_db (float): target SNR in dB
        rng_seed (int): seed for the white noise
        interference_to_noise_db (float): interference power over white noise
            power before the final scaling
        return_noise (bool): also return the combined noise vector

    Returns:
        IQWindow (or (IQWindow, np.ndarray) if return_noise): mixed window,
            snr_db recorded in metadata

    Raises:
        SignalError: zero-power or non-finite signal, non-finite interference
        ValidationError: length or sample-rate mismatch

    Example:
        >>> mixed = mix_to_snr(clean, None, snr_db=10.0, rng_seed=1)
        >>> mixed.snr_db
        10.0
    """
    x = np.asarray(signal.samples, dtype=np.complex128)
    if not np.all(np.isfinite(x)):
        raise SignalError("Signal contains non-finite samples")
    if not np.isfinite(snr_db):
        raise SignalError(f"Target SNR must be finite, got {snr_db}")

    p_signal = measured_power(x)
    if p_signal <= 0.0:
        raise SignalError("Signal has zero power; SNR is undefined")

    rng = np.random.default_rng(rng_seed)
    noise = complex_awgn(x.size, rng)

    if interference is not None:
        if interference.samples.shape != signal.samples.shape:
            raise ValidationError(
                f"Interference length {interference.samples.shape[0]} does not match "
                f"signal length {signal.samples.shape[0]}"
            )
        if interference.sample_rate != signal.sample_rate:
            raise ValidationError("Interference and signal sample rates differ")
        i = np.asarray(interference.samples, dtype=np.complex128)
        if not np.all(np.isfinite(i)):
            raise SignalError("Interference contains non-finite samples")
        p_interference = measured_power(i)
        if p_interference > 0.0:
            inr = 10.0 ** (interference_to_noise_db / 10.0)
            noise = noise + i * np.sqrt(inr * measured_power(noise) / p_interference)

    target_noise_power = p_signal / (10.0 ** (snr_db / 10.0))
    noise *= np.sqrt(target_noise_power / measured_power(noise))

    mixed = replace(
        signal,
        samples=(x + noise).astype(np.complex64),
        snr_db=float(snr_db),
    )
    if return_noise:
        return mixed, noise
    return mixed
