# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot kernels: separable reflect-101 filtering, windowed SSIM and
the first-order IIR recursion. Mirrors ``_pykernels`` exactly."""
import numpy as np

NAME = "cython"


cdef inline Py_ssize_t _reflect101(Py_ssize_t i, Py_ssize_t n) nogil:
    cdef Py_ssize_t period
    if n == 1:
        return 0
    period = 2 * (n - 1)
    i = i % period
    if i < 0:
        i += period
    if i >= n:
        i = period - i
    return i


def sep_filter(const double[:, ::1] src, const double[::1] taps, Py_ssize_t step):
    cdef Py_ssize_t rows = src.shape[0]
    cdef Py_ssize_t n = src.shape[1]
    cdef Py_ssize_t ntaps = taps.shape[0]
    cdef Py_ssize_t r = ntaps // 2
    cdef Py_ssize_t n_out = (n + step - 1) // step
    out_arr = np.empty((rows, n_out), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    # reflected source index per (output position, tap), shared by all rows
    idx_arr = np.empty((n_out, ntaps), dtype=np.intp)
    cdef Py_ssize_t[:, ::1] idx = idx_arr
    cdef Py_ssize_t row, j, k
    cdef double acc
    cdef const double* line
    with nogil:
        for j in range(n_out):
            for k in range(ntaps):
                idx[j, k] = _reflect101(j * step + k - r, n)
        for row in range(rows):
            line = &src[row, 0]
            for j in range(n_out):
                acc = taps[0] * line[idx[j, 0]]
                for k in range(1, ntaps):
                    acc = acc + taps[k] * line[idx[j, k]]
                out[row, j] = acc
    return out_arr


def ssim_mean(const double[:, ::1] x, const double[:, ::1] y,
              Py_ssize_t window, Py_ssize_t stride, double c1, double c2):
    cdef Py_ssize_t h = x.shape[0]
    cdef Py_ssize_t w = x.shape[1]
    cdef Py_ssize_t nwx = (w - window) // stride + 1
    cdef Py_ssize_t nwy = (h - window) // stride + 1
    # per-row horizontal window sums for x, y, xx, yy, xy
    row_arr = np.empty((5, h, nwx), dtype=np.float64)
    cdef double[:, :, ::1] rs = row_arr
    cdef Py_ssize_t r, i, j, k, c0
    cdef double sx, sy, sxx, syy, sxy, a, b
    cdef double n = <double>(window * window)
    cdef double mx, my, vx, vy, cxy, total = 0.0, row_total
    with nogil:
        for r in range(h):
            for j in range(nwx):
                c0 = j * stride
                sx = 0.0
                sy = 0.0
                sxx = 0.0
                syy = 0.0
                sxy = 0.0
                for k in range(window):
                    a = x[r, c0 + k]
                    b = y[r, c0 + k]
                    sx = sx + a
                    sy = sy + b
                    sxx = sxx + a * a
                    syy = syy + b * b
                    sxy = sxy + a * b
                rs[0, r, j] = sx
                rs[1, r, j] = sy
                rs[2, r, j] = sxx
                rs[3, r, j] = syy
                rs[4, r, j] = sxy
        for i in range(nwy):
            row_total = 0.0
            for j in range(nwx):
                sx = 0.0
                sy = 0.0
                sxx = 0.0
                syy = 0.0
                sxy = 0.0
                for k in range(window):
                    r = i * stride + k
                    sx = sx + rs[0, r, j]
                    sy = sy + rs[1, r, j]
                    sxx = sxx + rs[2, r, j]
                    syy = syy + rs[3, r, j]
                    sxy = sxy + rs[4, r, j]
                mx = sx / n
                my = sy / n
                vx = sxx / n - mx * mx
                vy = syy / n - my * my
                cxy = sxy / n - mx * my
                row_total = row_total + ((2.0 * mx * my + c1) * (2.0 * cxy + c2)) / (
                    (mx * mx + my * my + c1) * (vx + vy + c2))
            total = total + row_total
    return total / <double>(nwx * nwy)


def iir_lowpass(const double[:, ::1] x, double a):
    cdef Py_ssize_t T = x.shape[0]
    cdef Py_ssize_t P = x.shape[1]
    out_arr = np.empty((T, P), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    cdef Py_ssize_t t, p
    with nogil:
        for p in range(P):
            out[0, p] = x[0, p]
        for t in range(1, T):
            for p in range(P):
                out[t, p] = out[t - 1, p] + a * (x[t, p] - out[t - 1, p])
    return out_arr
