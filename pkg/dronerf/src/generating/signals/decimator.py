"""
Anti-aliased integer decimation (56 MHz captures -> 14 MHz windows).

An order-8 Chebyshev type I low-pass (0.05 dB ripple, cutoff at 0.8 of the
new Nyquist) is applied forward and backward, then every factor-th sample is
kept.
"""

import numpy as np
from scipy import signal

from dronerf.src.errors import SignalError, ValidationError
from dronerf.src.generating.config.config import (
    ANTIALIAS_ORDER,
    ANTIALIAS_RIPPLE_DB,
    DECIMATION_FACTOR,
)


def design_antialias_filter(factor=DECIMATION_FACTOR, order=ANTIALIAS_ORDER,
                            ripple_db=ANTIALIAS_RIPPLE_DB):
    """
    Second-order sections of the anti-alias low-pass for a decimation factor.

    Even-order Chebyshev I filters sit at the bottom of the ripple at DC, so
    the numerator is rescaled to unit DC gain.
    """
    sos = signal.cheby1(order, ripple_db, 0.8 / factor, output="sos")
    _, h_dc = signal.freqz_sos(sos, worN=[0.0])
    sos[0, :3] /= np.abs(h_dc[0])
    return sos


def decimate(iq, factor=DECIMATION_FACTOR):
    """
    Low-pass and downsample a complex vector.

    Args:
        iq (np.ndarray): 1-D complex vector at the high rate
        factor (int): decimation factor (4 for 56 -> 14 MHz)

    Returns:
        np.ndarray: complex64 vector of length len(iq) // factor

    Raises:
        ValidationError: factor < 1 or length not divisible by factor
        SignalError: non-finite input

    Example:
        >>> decimate(np.ones(65536, dtype=np.complex64)).shape
        (16384,)
    """
    iq = np.asarray(iq)
    if iq.ndim != 1:
        raise ValidationError("decimate expects a 1-D vector")
    if not isinstance(factor, (int, np.integer)) or factor < 1:
        raise ValidationError(f"Decimation factor must be a positive integer, got {factor}")
    if iq.shape[0] % factor != 0:
        raise ValidationError(
            f"Input length {iq.shape[0]} is not divisible by decimation factor {factor}"
        )
    if not np.all(np.isfinite(iq)):
        raise SignalError("Cannot decimate non-finite samples")
    if factor == 1:
        return iq.astype(np.complex64)

    sos = design_antialias_filter(factor)
    x = iq.astype(np.complex128)
    filtered = signal.sosfiltfilt(sos, x.real) + 1j * signal.sosfiltfilt(sos, x.imag)
    return filtered[::factor].astype(np.complex64)
