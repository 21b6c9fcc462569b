"""Adjacent-frame SSIM series and their drop statistics."""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from evmforge import _backend, frameio
from evmforge.errors import (
    DimensionMismatch,
    FrameSmallerThanWindow,
    SeriesTooShort,
    TooFewFrames,
)
from evmforge.frameio import FrameSequence
from evmforge.report import fmt

SOURCES = ("ORIGINAL", "EVM")


@dataclass(frozen=True)
class SsimParams:
    window: int = 8
    stride: int = 1
    c1: float | None = None  # default (0.01 * L)^2
    c2: float | None = None  # default (0.03 * L)^2
    dynamic_range: float = 1.0

    def __post_init__(self):
        if self.window < 2:
            raise ValueError("window must be >= 2")
        if self.stride < 1:
            raise ValueError("stride must be >= 1")
        if self.c1 is None:
            object.__setattr__(self, "c1", (0.01 * self.dynamic_range) ** 2)
        if self.c2 is None:
            object.__setattr__(self, "c2", (0.03 * self.dynamic_range) ** 2)
        if self.c1 <= 0 or self.c2 <= 0:
            raise ValueError("c1 and c2 must be positive")


def _plane(f):
    f = np.asarray(f, dtype=np.float64)
    if f.ndim == 3:
        if f.shape[-1] == 3:
            return f @ frameio.RGB_TO_YIQ[0]
        if f.shape[-1] == 1:
            return f[..., 0]
    if f.ndim != 2:
        raise DimensionMismatch(f"expected a 2-D plane or (H, W, 1|3) frame, got {f.shape}")
    return f


def ssim_pair(x, y, p: SsimParams = SsimParams()) -> float:
    """Mean SSIM of two frames over uniform ``N x N`` windows.

    2-D inputs are used as-is; ``(H, W, 3)`` frames are treated as RGB and
    reduced to luma, ``(H, W, 1)`` as single-channel.
    """
    x, y = _plane(x), _plane(y)
    if x.shape != y.shape:
        raise DimensionMismatch(f"frame shapes differ: {x.shape} vs {y.shape}")
    if min(x.shape) < p.window:
        raise FrameSmallerThanWindow(f"{x.shape} frame smaller than window {p.window}")
    return _backend.kernels.ssim_mean(
        np.ascontiguousarray(x), np.ascontiguousarray(y), p.window, p.stride, p.c1, p.c2
    )


@dataclass(frozen=True)
class SsimSeries:
    values: np.ndarray
    source: str = "ORIGINAL"

    def __post_init__(self):
        if self.source not in SOURCES:
            raise ValueError(f"source must be one of {SOURCES}")
        object.__setattr__(self, "values", np.asarray(self.values, dtype=np.float64))

    def __len__(self):
        return self.values.size


def ssim_series(seq: FrameSequence, p: SsimParams = SsimParams(), source="ORIGINAL") -> SsimSeries:
    if len(seq) < 2:
        raise TooFewFrames("ssim_series needs >= 2 frames")
    planes = frameio.luma(seq)
    values = [ssim_pair(planes[i], planes[i + 1], p) for i in range(len(seq) - 1)]
    return SsimSeries(np.array(values), source)


class FeatureVector(NamedTuple):
    mean: float
    std: float
    min: float
    p05: float
    drop_count: float
    max_run_below_mean: float
    lag1_autocorr: float

    def as_array(self):
        return np.array(self, dtype=np.float64)


FEATURE_NAMES = FeatureVector._fields


def _longest_run(mask):
    best = run = 0
    for m in mask:
        run = run + 1 if m else 0
        best = max(best, run)
    return best


def features(s) -> FeatureVector:
    """Summary statistics of an SSIM series in the fixed FeatureVector order."""
    v = np.asarray(s.values if isinstance(s, SsimSeries) else s, dtype=np.float64)
    if v.size < 3:
        raise SeriesTooShort(f"features need >= 3 values, got {v.size}")
    p05 = float(np.percentile(v, 5))
    if np.ptp(v) == 0:
        c = float(v[0])
        return FeatureVector(c, 0.0, c, c, 0.0, 0.0, 0.0)
    mean = float(np.mean(v))
    std = float(np.std(v))
    dev = v - mean
    denom = float(np.dot(dev, dev))
    autocorr = float(np.dot(dev[:-1], dev[1:]) / denom) if denom > 0 else 0.0
    return FeatureVector(
        mean=mean,
        std=std,
        min=float(v.min()),
        p05=p05,
        drop_count=float(np.count_nonzero(v < mean - 2.0 * std)),
        max_run_below_mean=float(_longest_run(v < mean)),
        lag1_autocorr=autocorr,
    )


FEATURES_HEADER = ("clip_id", "source", *FEATURE_NAMES, "label")


def series_csv(s: SsimSeries) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["pair_index", "ssim", "source"])
    for i, val in enumerate(s.values):
        w.writerow([i, fmt(val), s.source])
    return buf.getvalue()


def features_csv(rows) -> str:
    """Render ``(clip_id, source, FeatureVector, label)`` tuples as CSV."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(FEATURES_HEADER)
    for clip_id, source, fv, label in rows:
        w.writerow([clip_id, source, *(fmt(x) for x in fv), label])
    return buf.getvalue()


def read_features_csv(text):
    """Parse features CSV text into ``(clip_id, source, FeatureVector, label)``."""
    reader = csv.DictReader(io.StringIO(text))
    missing = [c for c in FEATURES_HEADER if c not in (reader.fieldnames or [])]
    if missing:
        raise KeyError(missing)
    rows = []
    for rec in reader:
        fv = FeatureVector(*(float(rec[n]) for n in FEATURE_NAMES))
        rows.append((rec["clip_id"], rec["source"], fv, rec["label"]))
    return rows
