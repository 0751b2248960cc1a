"""
Sampling-rate harmonization and anti-alias filtering.

Resampling happens in two steps:
    1. integer over- or undersampling by the whole multiple that brings the rate nearest
       to the target (sample repetition or decimation),
    2. nearest-neighbour index mapping to exactly the target rate.

Ties in step 1 are broken toward oversampling.
"""

import math
from typing import Tuple

import numpy as np
from scipy.signal import filtfilt, firwin

from bendr.app.core.exceptions import ShapeError


TARGET_RATE = 256.0

# Hamming main-lobe transition width in units of rate / numtaps, with a design margin
_HAMMING_TRANSITION = 3.3 * 1.25


def integer_factor(native_rate: float, target_rate: float = TARGET_RATE) -> Tuple[str, int]:
    """
    Choose the whole-multiple resampling step nearest to `target_rate`.

    Returns:
        Tuple[str, int]: ("up", k) to repeat every sample k times, or ("down", k) to keep
            every k-th sample. ("up", 1) leaves the signal unchanged.
    """
    if native_rate <= 0:
        raise ValueError(f"Sampling rate must be positive, got {native_rate}")
    candidates = []
    ratio = target_rate / native_rate
    for k in {max(1, math.floor(ratio)), max(1, math.ceil(ratio))}:
        candidates.append((abs(native_rate * k - target_rate), -native_rate * k, "up", k))
    for k in {max(1, math.floor(1.0 / ratio)), max(1, math.ceil(1.0 / ratio))}:
        candidates.append((abs(native_rate / k - target_rate), -native_rate / k, "down", k))
    _, _, direction, k = min(candidates)
    return (direction, k) if k > 1 else ("up", 1)


def nearest_neighbour_indices(length: int, rate: float, target_rate: float, out_length: int) -> np.ndarray:
    """ Source index of every output sample when moving from `rate` to `target_rate`. """
    positions = np.arange(out_length) * (rate / target_rate)
    return np.clip(np.floor(positions + 0.5).astype(np.int64), 0, max(length - 1, 0))


def resample(x: np.ndarray, native_rate: float, target_rate: float = TARGET_RATE) -> np.ndarray:
    """
    Bring a signal (or channels x samples array) to `target_rate`.

    Args:
        x (np.ndarray): Samples along the last axis.
        native_rate (float): Rate of `x` in Hz.
        target_rate (float): Output rate in Hz.

    Returns:
        np.ndarray: Resampled signal with `round(L * target_rate / native_rate)` samples.
    """
    x = np.asarray(x, dtype=np.float64)
    length = x.shape[-1]
    out_length = int(round(length * target_rate / native_rate))
    if native_rate == target_rate:
        return x.copy()

    direction, k = integer_factor(native_rate, target_rate)
    if direction == "up":
        stepped, rate = np.repeat(x, k, axis=-1), native_rate * k
    else:
        stepped, rate = x[..., ::k], native_rate / k
    if rate == target_rate and stepped.shape[-1] == out_length:
        return stepped.copy()
    indices = nearest_neighbour_indices(stepped.shape[-1], rate, target_rate, out_length)
    return stepped[..., indices]


def lowpass_taps(cutoff: float, rate: float) -> np.ndarray:
    """
    Hamming-window FIR low-pass with its transition band spanning 0.8 to 1.2 times `cutoff`.

    Raises:
        ValueError: If `cutoff` is not below the Nyquist frequency.
    """
    nyquist = rate / 2.0
    if cutoff <= 0 or cutoff >= nyquist:
        raise ValueError(f"Low-pass cutoff {cutoff} Hz must lie in (0, {nyquist}) Hz for rate {rate} Hz")
    transition = 0.4 * cutoff
    numtaps = int(math.ceil(_HAMMING_TRANSITION * rate / transition))
    numtaps += 1 - numtaps % 2
    return firwin(numtaps, cutoff, window="hamming", fs=rate)


def lowpass(x: np.ndarray, cutoff: float, rate: float) -> np.ndarray:
    """
    Zero-phase low-pass filter along the last axis (forward-backward FIR).

    Args:
        x (np.ndarray): Samples along the last axis.
        cutoff (float): Cutoff frequency in Hz.
        rate (float): Sampling rate in Hz.

    Returns:
        np.ndarray: Filtered signal of the same shape.

    Raises:
        ValueError: If `cutoff` is at or above the Nyquist frequency.
        ShapeError: If the signal is too short to filter.
    """
    x = np.asarray(x, dtype=np.float64)
    taps = lowpass_taps(cutoff, rate)
    length = x.shape[-1]
    if length < 2:
        raise ShapeError(f"Cannot filter a signal of {length} samples")
    padlen = min(3 * (len(taps) - 1), length - 1)
    return filtfilt(taps, [1.0], x, axis=-1, padlen=padlen)
