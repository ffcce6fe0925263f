"""Gray-mapped square QAM with unit average symbol energy."""
import numpy as np

SUPPORTED_ORDERS = (4, 16, 64)


def bits_per_symbol(order):
    if order not in SUPPORTED_ORDERS:
        raise ValueError(f"QAM order {order} not in {SUPPORTED_ORDERS}")
    return int(np.log2(order))


def _pam_levels(bits_per_axis):
    m = 2 ** bits_per_axis
    levels = 2 * np.arange(m) - (m - 1)
    # gray code g -> level index so that neighbours differ in one bit
    gray = np.arange(m) ^ (np.arange(m) >> 1)
    table = np.empty(m)
    table[gray] = levels
    return table


def scale(order):
    """Amplitude factor giving unit average energy."""
    m = int(np.sqrt(order))
    return np.sqrt(2 * (m * m - 1) / 3)


def _bits_to_int(bits):
    w = bits.shape[-1]
    weights = 1 << np.arange(w - 1, -1, -1)
    return bits @ weights


def modulate(bits, order):
    """Map a flat 0/1 array to complex symbols (I bits first, then Q bits)."""
    b = bits_per_symbol(order)
    bits = np.asarray(bits, dtype=np.int64).reshape(-1, b)
    half = b // 2
    table = _pam_levels(half)
    i = table[_bits_to_int(bits[:, :half])]
    q = table[_bits_to_int(bits[:, half:])]
    return (i + 1j * q) / scale(order)


def _pam_decide(x, half):
    m = 2 ** half
    idx = np.clip(np.round((x + (m - 1)) / 2), 0, m - 1).astype(np.int64)
    gray = idx ^ (idx >> 1)
    shifts = np.arange(half - 1, -1, -1)
    return (gray[:, None] >> shifts) & 1


def demodulate(symbols, order):
    """Hard-decision demapping back to a flat bit array."""
    b = bits_per_symbol(order)
    half = b // 2
    s = np.asarray(symbols).ravel() * scale(order)
    bi = _pam_decide(s.real, half)
    bq = _pam_decide(s.imag, half)
    return np.concatenate([bi, bq], axis=1).reshape(-1).astype(np.uint8)
