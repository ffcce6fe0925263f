"""Pure-numpy versions of the filter-bank inner loops.

Used when the compiled extension is unavailable or when
``DPFBMC_PURE_PYTHON=1`` is set.
"""
import numpy as np


def overlap_add(segments, hop):
    segments = np.ascontiguousarray(segments, dtype=np.complex128)
    n_seg, seg_len = segments.shape
    if n_seg == 0:
        return np.zeros(0, dtype=np.complex128)
    out = np.zeros(seg_len + (n_seg - 1) * hop, dtype=np.complex128)
    if seg_len % hop == 0:
        blocks = seg_len // hop
        view = out.reshape(-1, hop)
        parts = segments.reshape(n_seg, blocks, hop)
        for b in range(blocks):
            view[b:b + n_seg] += parts[:, b, :]
    else:
        for m in range(n_seg):
            out[m * hop:m * hop + seg_len] += segments[m]
    return out


def polyphase_fold(y, h, n_sym, hop, n_fft):
    y = np.asarray(y, dtype=np.complex128)
    h = np.asarray(h, dtype=np.float64)
    L = h.size
    need = (n_sym - 1) * hop + L
    if y.size < need:
        y = np.concatenate([y, np.zeros(need - y.size, dtype=np.complex128)])
    windows = np.lib.stride_tricks.sliding_window_view(y, L)[::hop][:n_sym]
    z = windows * h
    n_full = L // n_fft
    folded = z[:, :n_full * n_fft].reshape(n_sym, n_full, n_fft).sum(axis=1)
    rem = L - n_full * n_fft
    if rem:
        folded[:, :rem] += z[:, n_full * n_fft:]
    return folded


def direct_synthesis(a, h, freqs, ref, hop):
    a = np.asarray(a, dtype=np.float64)
    h = np.asarray(h, dtype=np.float64)
    freqs = np.asarray(freqs, dtype=np.float64)
    n_sub, n_sym = a.shape
    L = h.size
    out = np.zeros(L + (n_sym - 1) * hop, dtype=np.complex128)
    quarter = np.array([1, 1j, -1, -1j])
    n_idx = np.arange(n_sub)
    for m in range(n_sym):
        active = np.flatnonzero(a[:, m])
        if active.size == 0:
            continue
        k = m * hop + np.arange(L)
        coef = a[active, m] * quarter[(n_idx[active] + m) % 4]
        carriers = np.exp(2j * np.pi * np.outer(k - ref, freqs[active]) / n_sub)
        out[k] += h * (carriers @ coef)
    return out
