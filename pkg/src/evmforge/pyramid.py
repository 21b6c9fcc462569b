"""Gaussian / Laplacian pyramids with the 5-tap binomial kernel.

All functions take arrays whose spatial axes are ``(-3, -2)`` and whose last
axis is channels, so a single frame ``(H, W, C)`` and a whole clip
``(T, H, W, C)`` go through the same code (the clip is filtered in one batch).
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from evmforge import _backend
from evmforge.errors import BadTargetDims, DepthTooLarge, ShapeMismatch, TooSmall

BINOMIAL5 = np.array([1.0, 4.0, 6.0, 4.0, 1.0]) / 16.0
_UP_TAPS = 2.0 * BINOMIAL5

MAX_DEFAULT_DEPTH = 6
MIN_RESIDUAL = 16


def _half(n):
    return -(-n // 2)


def _spatial(a):
    a = np.asarray(a, dtype=np.float64)
    if a.ndim < 3:
        raise ShapeMismatch(f"expected (..., H, W, C) array, got shape {a.shape}")
    return a


def _filter_axis(a, axis, taps, step):
    moved = np.moveaxis(a, axis, -1)
    lead = moved.shape[:-1]
    flat = np.ascontiguousarray(moved).reshape(-1, moved.shape[-1])
    out = _backend.kernels.sep_filter(flat, taps, step)
    return np.moveaxis(out.reshape(lead + (out.shape[1],)), -1, axis)


def blur_downsample(f):
    """Binomial blur (reflect-101) then keep even rows/columns."""
    f = _spatial(f)
    h, w = f.shape[-3], f.shape[-2]
    if h < 2 or w < 2:
        raise TooSmall(f"cannot downsample a {w}x{h} frame")
    out = _filter_axis(f, -3, BINOMIAL5, 2)
    return _filter_axis(out, -2, BINOMIAL5, 2)


def _zero_insert(a, axis, n_out):
    shape = list(a.shape)
    shape[axis] = n_out
    z = np.zeros(shape)
    idx = [slice(None)] * a.ndim
    idx[axis] = slice(0, n_out, 2)
    z[tuple(idx)] = a
    return z


def upsample(f, target_w, target_h):
    """Zero-insert onto a ``target_h x target_w`` grid, then blur with the
    binomial kernel scaled by 2 per axis."""
    f = _spatial(f)
    h, w = f.shape[-3], f.shape[-2]
    if _half(target_h) != h or _half(target_w) != w or target_h < 1 or target_w < 1:
        raise BadTargetDims(f"cannot upsample {w}x{h} to {target_w}x{target_h}")
    if h < 2 or w < 2:
        raise TooSmall(f"cannot upsample a {w}x{h} frame")
    out = _filter_axis(_zero_insert(f, -3, target_h), -3, _UP_TAPS, 1)
    return _filter_axis(_zero_insert(out, -2, target_w), -2, _UP_TAPS, 1)


def check_depth(h, w, depth):
    if depth < 1:
        raise DepthTooLarge(f"depth must be >= 1, got {depth}")
    if min(h, w) / 2 ** (depth - 1) < 2:
        raise DepthTooLarge(f"depth {depth} too large for {w}x{h}")


def level_dims(h, w, depth):
    dims = [(h, w)]
    for _ in range(depth - 1):
        h, w = _half(h), _half(w)
        dims.append((h, w))
    return dims


def default_depth(h, w):
    """Largest depth (capped at 6) whose residual keeps min dimension >= 16."""
    best = 1
    for d in range(2, MAX_DEFAULT_DEPTH + 1):
        try:
            check_depth(h, w, d)
        except DepthTooLarge:
            break
        rh, rw = level_dims(h, w, d)[-1]
        if min(rh, rw) < MIN_RESIDUAL:
            break
        best = d
    return best


def build_gaussian(f, depth=None):
    f = _spatial(f)
    h, w = f.shape[-3], f.shape[-2]
    if depth is None:
        depth = default_depth(h, w)
    check_depth(h, w, depth)
    levels = [f]
    for _ in range(depth - 1):
        levels.append(blur_downsample(levels[-1]))
    return levels


@dataclass
class LaplacianPyramid:
    bands: list = field(default_factory=list)
    residual: np.ndarray = None

    @property
    def depth(self):
        return len(self.bands) + 1

    def levels(self):
        """Bands followed by the residual, finest first."""
        return [*self.bands, self.residual]


def build_laplacian(f, depth=None) -> LaplacianPyramid:
    gauss = build_gaussian(f, depth)
    bands = []
    for fine, coarse in zip(gauss[:-1], gauss[1:]):
        bands.append(fine - upsample(coarse, fine.shape[-2], fine.shape[-3]))
    return LaplacianPyramid(bands=bands, residual=gauss[-1])


def collapse(p: LaplacianPyramid):
    g = _spatial(p.residual)
    for band in reversed(p.bands):
        band = _spatial(band)
        h, w = band.shape[-3], band.shape[-2]
        if (
            band.shape[:-3] != g.shape[:-3]
            or band.shape[-1] != g.shape[-1]
            or (_half(h), _half(w)) != g.shape[-3:-1]
        ):
            raise ShapeMismatch(f"band {band.shape} does not sit above level {g.shape}")
        g = band + upsample(g, w, h)
    return g
