# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled inner loops for the FBMC synthesis and analysis filter banks.

Each function mirrors one in :mod:`dpfbmc._kernels_py` and must return the
same values to floating-point rounding.
"""
import numpy as np

from libc.math cimport cos, sin, M_PI


def overlap_add(const double complex[:, ::1] segments, Py_ssize_t hop):
    cdef Py_ssize_t n_seg = segments.shape[0]
    cdef Py_ssize_t seg_len = segments.shape[1]
    cdef Py_ssize_t total = seg_len + (n_seg - 1) * hop if n_seg > 0 else 0
    out = np.zeros(total, dtype=np.complex128)
    cdef double complex[::1] o = out
    cdef Py_ssize_t m, i, start
    for m in range(n_seg):
        start = m * hop
        for i in range(seg_len):
            o[start + i] = o[start + i] + segments[m, i]
    return out


def polyphase_fold(const double complex[::1] y, const double[::1] h,
                   Py_ssize_t n_sym, Py_ssize_t hop, Py_ssize_t n_fft):
    cdef Py_ssize_t L = h.shape[0]
    cdef Py_ssize_t ny = y.shape[0]
    out = np.zeros((n_sym, n_fft), dtype=np.complex128)
    cdef double[:, ::1] o = out.view(np.float64)
    cdef const double[::1] yr = np.asarray(y).view(np.float64)
    cdef Py_ssize_t m, i, j, start, stop
    cdef double hv
    for m in range(n_sym):
        start = m * hop
        stop = min(L, ny - start)
        j = 0
        for i in range(stop):
            hv = h[i]
            o[m, 2 * j] += yr[2 * (start + i)] * hv
            o[m, 2 * j + 1] += yr[2 * (start + i) + 1] * hv
            j += 1
            if j == n_fft:
                j = 0
    return out


def direct_synthesis(const double[:, ::1] a, const double[::1] h,
                     const double[::1] freqs, double ref, Py_ssize_t hop):
    cdef Py_ssize_t n_sub = a.shape[0]
    cdef Py_ssize_t n_sym = a.shape[1]
    cdef Py_ssize_t L = h.shape[0]
    cdef Py_ssize_t total = L + (n_sym - 1) * hop
    cdef double n_fft = <double>n_sub
    out = np.zeros(total, dtype=np.complex128)
    cdef double[::1] o = out.view(np.float64)
    cdef Py_ssize_t n, m, i, k, quarter
    cdef double amp, ang, re_ph, im_ph, c, s
    cdef double step_c, step_s, pc, ps, t, w
    for m in range(n_sym):
        for n in range(n_sub):
            amp = a[n, m]
            if amp == 0.0:
                continue
            quarter = (n + m) % 4
            re_ph = 1.0 if quarter == 0 else (-1.0 if quarter == 2 else 0.0)
            im_ph = 1.0 if quarter == 1 else (-1.0 if quarter == 3 else 0.0)
            step_c = cos(2.0 * M_PI * freqs[n] / n_fft)
            step_s = sin(2.0 * M_PI * freqs[n] / n_fft)
            for i in range(L):
                k = m * hop + i
                if i % 64 == 0:
                    ang = 2.0 * M_PI * freqs[n] * (k - ref) / n_fft
                    pc = cos(ang)
                    ps = sin(ang)
                w = amp * h[i]
                c = pc * w
                s = ps * w
                o[2 * k] += c * re_ph - s * im_ph
                o[2 * k + 1] += c * im_ph + s * re_ph
                t = pc * step_c - ps * step_s
                ps = pc * step_s + ps * step_c
                pc = t
    return out
