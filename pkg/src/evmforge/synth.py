"""Synthetic clips with known ground truth, for tests and the ``synth`` command.

Every clip sits on a smooth seeded texture in roughly ``[0.3, 0.7]`` so that
amplified signals do not clip and SSIM windows have structure.
"""
from __future__ import annotations

import numpy as np

from evmforge.frameio import DEFAULT_FPS, FrameSequence

KINDS = ("static", "sine_brightness", "sine_translation", "glitch")


def _texture(h, w, rng, shift_x=0.0, n_waves=6):
    """Sum of random oriented gratings sampled at ``x - shift_x``; ``(h, w, 3)``."""
    yy, xx = np.mgrid[0:h, 0:w].astype(np.float64)
    xx = xx - shift_x
    out = np.zeros((h, w, 3))
    for _ in range(n_waves):
        period = rng.uniform(6.0, 24.0)
        theta = rng.uniform(0.0, np.pi)
        phase = rng.uniform(0.0, 2 * np.pi)
        tint = rng.uniform(0.5, 1.0, size=3)
        kx, ky = np.cos(theta) * 2 * np.pi / period, np.sin(theta) * 2 * np.pi / period
        out += np.sin(kx * xx + ky * yy + phase)[..., np.newaxis] * tint
    return 0.5 + 0.2 * out / n_waves


def static(frames=64, width=32, height=32, fps=DEFAULT_FPS, seed=0):
    base = _texture(height, width, np.random.default_rng(seed))
    return FrameSequence(np.repeat(base[np.newaxis], frames, axis=0), fps=fps)


def sine_brightness(frames=300, width=32, height=32, fps=DEFAULT_FPS, freq=1.096,
                    amplitude=0.004, seed=0, textured=True):
    """Whole-frame brightness modulated by ``amplitude * sin(2 pi freq t)``."""
    if textured:
        base = _texture(height, width, np.random.default_rng(seed))
    else:
        base = np.full((height, width, 3), 0.5)
    t = np.arange(frames) / fps
    mod = amplitude * np.sin(2 * np.pi * freq * t)
    return FrameSequence(base[np.newaxis] + mod[:, None, None, None], fps=fps)


def sine_translation(frames=64, width=32, height=32, fps=DEFAULT_FPS, freq=0.9375,
                     amplitude=0.25, seed=0):
    """Texture shifted horizontally by ``amplitude * sin(2 pi freq t)`` pixels."""
    t = np.arange(frames) / fps
    shifts = amplitude * np.sin(2 * np.pi * freq * t)
    out = [_texture(height, width, np.random.default_rng(seed), shift_x=s) for s in shifts]
    return FrameSequence(np.stack(out), fps=fps)


def glitch(frames=64, width=32, height=32, fps=DEFAULT_FPS, glitch_frames=None,
           strength=0.15, noise=0.03, seed=0):
    """Static texture with dropout frames: darkened by ``strength`` plus
    seeded Gaussian noise of std ``noise``."""
    rng = np.random.default_rng(seed)
    base = _texture(height, width, rng)
    data = np.repeat(base[np.newaxis], frames, axis=0)
    if glitch_frames is None:
        glitch_frames = [frames // 2]
    for k in glitch_frames:
        if not 0 <= k < frames:
            raise ValueError(f"glitch frame {k} outside clip of {frames} frames")
        data[k] = np.clip(base - strength + rng.normal(0.0, noise, size=base.shape), 0.0, 1.0)
    return FrameSequence(data, fps=fps)


def make(kind, **params) -> FrameSequence:
    try:
        fn = {
            "static": static,
            "sine_brightness": sine_brightness,
            "sine_translation": sine_translation,
            "glitch": glitch,
        }[kind]
    except KeyError:
        raise ValueError(f"unknown synthetic kind {kind!r}; choose from {KINDS}") from None
    return fn(**params)
