"""Heart-rate estimation from ROI colour pulsation by spectral peak picking."""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass

import numpy as np

from evmforge import frameio
from evmforge.errors import ChannelMismatch, NoPeak, SeriesTooShort
from evmforge.frameio import FrameSequence, Roi
from evmforge.report import fmt
from evmforge.tfilter import BandSpec, TimeSeries

CHANNELS = ("R", "G", "B", "Y")
MIN_SAMPLES = 64
PAD_FACTOR = 8
PEAK_FLOOR = 1e-12
DEFAULT_BAND = BandSpec(1.0, 1.33)


@dataclass(frozen=True)
class PulseEstimate:
    bpm: float
    freq: float
    band: BandSpec
    freqs: np.ndarray
    magnitude: np.ndarray
    peak_magnitude: float

    @property
    def spectrum(self):
        return list(zip(self.freqs.tolist(), self.magnitude.tolist()))


def mean_series(seq: FrameSequence, roi: Roi | None = None, channel="G") -> TimeSeries:
    """Per-frame mean of one channel over ``roi`` (whole frame if None)."""
    if channel not in CHANNELS:
        raise ValueError(f"channel must be one of {CHANNELS}")
    if roi is not None:
        seq = frameio.crop(seq, roi)
    if seq.colorspace == "GRAY":
        plane = seq.frames[..., 0]
    elif channel == "Y":
        plane = frameio.luma(seq)
    elif seq.colorspace == "RGB":
        plane = seq.frames[..., "RGB".index(channel)]
    else:
        raise ChannelMismatch(f"channel {channel} unavailable in {seq.colorspace}")
    return TimeSeries(plane.reshape(len(seq), -1).mean(axis=1), seq.fps)


def padded_length(n):
    return 1 << int(np.ceil(np.log2(PAD_FACTOR * n)))


def estimate_bpm(s: TimeSeries, band: BandSpec = DEFAULT_BAND) -> PulseEstimate:
    """Dominant in-band frequency of a mean-removed, Hann-windowed series.

    The series is zero-padded to the next power of two >= 8x its length and
    the peak bin is refined by a parabola through the log-magnitudes of the
    peak and its neighbours; the result is clipped to the band.
    """
    n = len(s)
    if n < MIN_SAMPLES:
        raise SeriesTooShort(f"pulse estimation needs >= {MIN_SAMPLES} samples, got {n}")
    band.check(s.fps)
    x = (s.values - s.values.mean()) * np.hanning(n)
    m = padded_length(n)
    mag = np.abs(np.fft.rfft(x, n=m))
    freqs = np.arange(mag.size) * s.fps / m
    in_band = np.flatnonzero((freqs >= band.f_lo) & (freqs <= band.f_hi))
    if in_band.size == 0 or mag[in_band].max() < PEAK_FLOOR:
        raise NoPeak(f"no spectral peak between {band.f_lo} and {band.f_hi} Hz")
    k = int(in_band[np.argmax(mag[in_band])])
    offset = 0.0
    if 0 < k < mag.size - 1:
        a, b, c = np.log(np.maximum(mag[k - 1:k + 2], PEAK_FLOOR))
        denom = a - 2.0 * b + c
        if denom < 0:
            offset = 0.5 * (a - c) / denom
    freq = float(np.clip((k + offset) * s.fps / m, band.f_lo, band.f_hi))
    return PulseEstimate(
        bpm=60.0 * freq,
        freq=freq,
        band=band,
        freqs=freqs,
        magnitude=mag,
        peak_magnitude=float(mag[k]),
    )


def compare_pulse(a: PulseEstimate, b: PulseEstimate) -> float:
    return abs(a.bpm - b.bpm)


def spectrum_csv(est: PulseEstimate) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["frequency_hz", "magnitude"])
    for f, mval in zip(est.freqs, est.magnitude):
        w.writerow([fmt(f), fmt(mval)])
    w.writerow(["bpm", "freq_hz", "peak_magnitude"])
    w.writerow([fmt(est.bpm), fmt(est.freq), fmt(est.peak_magnitude)])
    return buf.getvalue()
