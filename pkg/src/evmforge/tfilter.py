"""Per-pixel temporal bandpass filters.

Filters run along ``axis`` (time, default 0) of arrays of any shape, so an
entire pyramid level ``(T, h, w, C)`` is filtered in one call.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from evmforge import _backend
from evmforge.errors import BandAboveNyquist, SeriesTooShort

MIN_LENGTH = 4
# relative slack on inclusive band edges, absorbs k*fps/N rounding
_EDGE_EPS = 1e-9
# cap on real samples per FFT batch to bound the complex temporaries
_CHUNK = 1 << 22


@dataclass(frozen=True)
class BandSpec:
    f_lo: float
    f_hi: float

    def __post_init__(self):
        if not (0 < self.f_lo < self.f_hi) or not np.isfinite(self.f_hi):
            raise ValueError(f"band needs 0 < f_lo < f_hi, got {self.f_lo}..{self.f_hi}")

    def check(self, fps):
        if self.f_hi > fps / 2.0 * (1 + _EDGE_EPS):
            raise BandAboveNyquist(f"f_hi={self.f_hi} Hz exceeds Nyquist {fps / 2.0} Hz")


@dataclass(frozen=True)
class TimeSeries:
    values: np.ndarray
    fps: float

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64).ravel()
        if values.size < 2:
            raise SeriesTooShort(f"series needs >= 2 samples, got {values.size}")
        if not np.all(np.isfinite(values)):
            raise ValueError("series contains non-finite values")
        object.__setattr__(self, "values", values)

    def __len__(self):
        return self.values.size


def _check(n, fps, band):
    if n < MIN_LENGTH:
        raise SeriesTooShort(f"need >= {MIN_LENGTH} samples, got {n}")
    band.check(fps)


def band_mask(n, fps, band: BandSpec):
    """Boolean mask over the ``n//2 + 1`` rfft bins kept by the ideal filter."""
    freqs = np.arange(n // 2 + 1) * fps / n
    lo = band.f_lo * (1 - _EDGE_EPS)
    hi = band.f_hi * (1 + _EDGE_EPS)
    return (freqs >= lo) & (freqs <= hi)


def ideal_bandpass(x, fps, band: BandSpec, axis=0):
    """Zero every DFT bin outside ``[f_lo, f_hi]`` (inclusive), DC included."""
    x = np.asarray(x, dtype=np.float64)
    n = x.shape[axis]
    _check(n, fps, band)
    mask = band_mask(n, fps, band)
    if not mask.any():
        return np.zeros_like(x)
    moved = np.moveaxis(x, axis, 0)
    flat = moved.reshape(n, -1)
    out = np.empty_like(flat)
    step = max(1, _CHUNK // n)
    for start in range(0, flat.shape[1], step):
        spec = np.fft.rfft(flat[:, start:start + step], axis=0)
        spec[~mask] = 0.0
        out[:, start:start + step] = np.fft.irfft(spec, n=n, axis=0)
    return np.moveaxis(out.reshape(moved.shape), 0, axis)


def lowpass_coefficient(fc, fps):
    w = 2.0 * np.pi * fc / fps
    return w / (1.0 + w)


def iir_bandpass(x, fps, band: BandSpec, axis=0):
    """Difference of two first-order lowpass recursions (f_hi minus f_lo)."""
    x = np.asarray(x, dtype=np.float64)
    n = x.shape[axis]
    _check(n, fps, band)
    moved = np.moveaxis(x, axis, 0)
    flat = np.ascontiguousarray(moved.reshape(n, -1))
    k = _backend.kernels
    hi = k.iir_lowpass(flat, lowpass_coefficient(band.f_hi, fps))
    lo = k.iir_lowpass(flat, lowpass_coefficient(band.f_lo, fps))
    return np.moveaxis((hi - lo).reshape(moved.shape), 0, axis)


FILTERS = {"ideal": ideal_bandpass, "iir": iir_bandpass}
