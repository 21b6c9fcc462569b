"""Numpy implementations of the hot kernels.

Used when the compiled ``_ckernels`` extension is unavailable or when
``EVMFORGE_BACKEND=python``. Signatures and accumulation order mirror the
Cython module so the two agree to rounding.
"""
import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

NAME = "python"


def reflect101(idx, n):
    """Map arbitrary integer indices into ``[0, n)`` by reflect-101 folding."""
    idx = np.asarray(idx)
    if n == 1:
        return np.zeros_like(idx)
    period = 2 * (n - 1)
    idx = np.mod(idx, period)
    return np.where(idx >= n, period - idx, idx)


def sep_filter(src, taps, step):
    """Correlate each row of ``src`` with ``taps`` (reflect-101 borders),
    keeping every ``step``-th output sample starting at 0."""
    src = np.ascontiguousarray(src, dtype=np.float64)
    taps = np.asarray(taps, dtype=np.float64)
    n = src.shape[1]
    r = len(taps) // 2
    pos = np.arange(0, n, step)
    out = taps[0] * src[:, reflect101(pos - r, n)]
    for k in range(1, len(taps)):
        out += taps[k] * src[:, reflect101(pos + k - r, n)]
    return out


def _window_sums(a, window, stride):
    s = sliding_window_view(a, window, axis=1)[:, ::stride].sum(axis=-1)
    return sliding_window_view(s, window, axis=0)[::stride].sum(axis=-1)


def ssim_mean(x, y, window, stride, c1, c2):
    """Mean SSIM over all ``window``-square windows at ``stride``."""
    x = np.ascontiguousarray(x, dtype=np.float64)
    y = np.ascontiguousarray(y, dtype=np.float64)
    n = float(window * window)
    mx = _window_sums(x, window, stride) / n
    my = _window_sums(y, window, stride) / n
    vx = _window_sums(x * x, window, stride) / n - mx * mx
    vy = _window_sums(y * y, window, stride) / n - my * my
    cxy = _window_sums(x * y, window, stride) / n - mx * my
    num = (2.0 * mx * my + c1) * (2.0 * cxy + c2)
    den = (mx * mx + my * my + c1) * (vx + vy + c2)
    return float(np.mean(num / den))


def iir_lowpass(x, a):
    """First-order recursion ``l[t] = l[t-1] + a*(x[t] - l[t-1])`` along
    axis 0 of a ``(T, P)`` array, seeded with ``l[0] = x[0]``."""
    x = np.ascontiguousarray(x, dtype=np.float64)
    out = np.empty_like(x)
    state = x[0].copy()
    out[0] = state
    for t in range(1, x.shape[0]):
        state = state + a * (x[t] - state)
        out[t] = state
    return out
