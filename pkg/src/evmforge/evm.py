"""Eulerian video magnification: decompose, bandpass, amplify, recombine.

Two modes share the machinery:

* ``COLOR`` bandpasses the coarsest Gaussian level (pulse-style colour
  amplification) and upsamples the amplified signal back to full size.
* ``MOTION`` bandpasses every Laplacian level, including the residual, and
  collapses the amplified pyramid.

Both run in YIQ so chroma amplification can be attenuated independently.
Intermediate values are unbounded; clamping to ``[0, 1]`` happens once at
the end (skip it with ``clamp=False``).
"""
from __future__ import annotations

import dataclasses
import logging
from dataclasses import dataclass

import numpy as np

from evmforge import frameio, pyramid, tfilter
from evmforge.errors import TooFewFrames
from evmforge.frameio import FrameSequence
from evmforge.tfilter import BandSpec

log = logging.getLogger(__name__)

MODES = ("COLOR", "MOTION")
MIN_FRAMES = 4
ASSUMED_DISPLACEMENT = 1.0  # pixels


@dataclass(frozen=True)
class MagParams:
    mode: str = "COLOR"
    alpha: float = 50.0
    band: BandSpec = BandSpec(0.8, 1.0)
    depth: int | None = None  # None: pyramid.default_depth
    chroma_atten: float = 1.0
    lambda_cutoff: float | None = None
    filter: str = "ideal"

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        if not np.isfinite(self.alpha) or self.alpha < 0:
            raise ValueError(f"alpha must be finite and >= 0, got {self.alpha}")
        if self.depth is not None and self.depth < 1:
            raise ValueError("depth must be >= 1")
        if not 0.0 <= self.chroma_atten <= 1.0:
            raise ValueError("chroma_atten must lie in [0, 1]")
        if self.filter not in tfilter.FILTERS:
            raise ValueError(f"unknown temporal filter {self.filter!r}")

    def replace(self, **changes) -> MagParams:
        return dataclasses.replace(self, **changes)

    def to_dict(self):
        d = dataclasses.asdict(self)
        d["band"] = [self.band.f_lo, self.band.f_hi]
        return d


def level_alpha(alpha, level, lambda_cutoff=None):
    """Amplification used on pyramid ``level`` (0 = finest).

    Without a cutoff the factor is uniform. With one, levels whose spatial
    wavelength ``2**(level+2)`` falls below the cutoff get 0 and the rest are
    bounded by ``wavelength / (8 * delta) - 1``.
    """
    if lambda_cutoff is None:
        return alpha
    wavelength = 2.0 ** (level + 2)
    if wavelength < lambda_cutoff:
        return 0.0
    return min(alpha, max(0.0, wavelength / (8.0 * ASSUMED_DISPLACEMENT) - 1.0))


def _channel_gain(alpha, chroma_atten):
    return np.array([alpha, alpha * chroma_atten, alpha * chroma_atten])


def _validate(seq: FrameSequence, p: MagParams):
    if len(seq) < MIN_FRAMES:
        raise TooFewFrames(f"magnification needs >= {MIN_FRAMES} frames, got {len(seq)}")
    if seq.colorspace != "RGB":
        raise ValueError(f"magnify expects an RGB sequence, got {seq.colorspace}")
    p.band.check(seq.fps)


def _color(yiq, fps, p: MagParams, depth):
    bandpass = tfilter.FILTERS[p.filter]
    h, w = yiq.shape[1:3]
    # validate before the pyramid work
    pyramid.check_depth(h, w, depth)
    coarse = pyramid.build_gaussian(yiq, depth)[-1]
    filtered = bandpass(coarse, fps, p.band, axis=0) * _channel_gain(p.alpha, p.chroma_atten)
    dims = pyramid.level_dims(h, w, depth)
    for lh, lw in reversed(dims[:-1]):
        filtered = pyramid.upsample(filtered, lw, lh)
    return yiq + filtered


def _motion(yiq, fps, p: MagParams, depth):
    bandpass = tfilter.FILTERS[p.filter]
    lap = pyramid.build_laplacian(yiq, depth)
    levels = lap.levels()
    amplified = []
    for k, level in enumerate(levels):
        a = level_alpha(p.alpha, k, p.lambda_cutoff)
        if a == 0.0:
            amplified.append(level)
            continue
        amplified.append(level + bandpass(level, fps, p.band, axis=0) * _channel_gain(a, p.chroma_atten))
    out = pyramid.LaplacianPyramid(bands=amplified[:-1], residual=amplified[-1])
    return pyramid.collapse(out)


def magnify(seq: FrameSequence, p: MagParams, clamp=True) -> FrameSequence:
    _validate(seq, p)
    depth = p.depth if p.depth is not None else pyramid.default_depth(seq.height, seq.width)
    yiq = frameio.rgb_to_yiq(seq.frames)
    if p.mode == "COLOR":
        out = _color(yiq, seq.fps, p, depth)
    else:
        out = _motion(yiq, seq.fps, p, depth)
    rgb = frameio.yiq_to_rgb(out)
    if clamp:
        rgb = np.clip(rgb, 0.0, 1.0)
    log.debug("magnified %d frames, mode=%s alpha=%g depth=%d", len(seq), p.mode, p.alpha, depth)
    return seq.replace(frames=rgb)


def sweep_alpha(seq: FrameSequence, base: MagParams, alphas, clamp=True):
    """One magnified copy of ``seq`` per amplification factor."""
    return [magnify(seq, base.replace(alpha=float(a)), clamp=clamp) for a in alphas]
