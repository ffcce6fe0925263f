"""BER counting, PSD and out-of-band power, PAPR, and closed-form references."""
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import signal, special


@dataclass
class BerRecord:
    bit_errors: int
    bits: int
    fingerprint: str = ""
    seed: int | None = None

    def __post_init__(self):
        if self.bits < 0 or self.bit_errors < 0 or self.bit_errors > self.bits:
            raise ValueError(f"invalid counts {self.bit_errors}/{self.bits}")

    @property
    def ber(self):
        if self.bits == 0:
            raise ValueError("BER undefined for zero bits")
        return self.bit_errors / self.bits

    def __add__(self, other):
        return BerRecord(self.bit_errors + other.bit_errors, self.bits + other.bits,
                         self.fingerprint or other.fingerprint, self.seed if self.seed is not None else other.seed)

    def ci_halfwidth(self, z=1.96):
        """Normal-approximation binomial half-width."""
        p = self.ber
        return z * math.sqrt(max(p * (1 - p), 0.0) / self.bits)


def ber_count(tx_bits, rx_bits, fingerprint="", seed=None):
    tx = np.asarray(tx_bits).ravel()
    rx = np.asarray(rx_bits).ravel()
    if tx.size != rx.size:
        raise ValueError(f"bit streams differ in length: {tx.size} vs {rx.size}")
    if tx.size == 0:
        raise ValueError("empty bit streams")
    return BerRecord(int(np.count_nonzero(tx != rx)), int(tx.size), fingerprint, seed)


@dataclass
class PsdEstimate:
    freqs: np.ndarray      # in subcarrier spacings, ascending, symmetric about 0
    density_db: np.ndarray
    params: dict = field(default_factory=dict)


def psd_periodogram(w, N, segment_len=None, overlap=0.5, window="hann"):
    """Welch-averaged periodogram, two-sided, normalized to 0 dB peak.

    ``freqs`` are expressed in subcarrier spacings (``f * N`` with f in
    cycles/sample).
    """
    x = w.samples if hasattr(w, "samples") else np.asarray(w)
    seg = segment_len or 4 * N
    if x.size < seg:
        raise ValueError(f"input of {x.size} samples shorter than segment {seg}")
    f, p = signal.welch(x, fs=1.0, window=window, nperseg=seg, noverlap=int(seg * overlap),
                        return_onesided=False, detrend=False, scaling="density")
    f = np.fft.fftshift(f)
    p = np.fft.fftshift(p)
    floor = np.finfo(float).tiny
    db = 10 * np.log10(np.maximum(p, floor) / max(p.max(), floor))
    params = {"segment_len": seg, "overlap": overlap, "window": window, "segments": 1 + (x.size - seg) // (seg - int(seg * overlap))}
    return PsdEstimate(f * N, db, params)


def oob_power(p, band_edge, guard_offset=2.0, floor_db=-300.0):
    """Mean density beyond ``band_edge + guard_offset`` (both sides) relative
    to the in-band mean, in dB."""
    f = np.abs(p.freqs)
    lin = 10 ** (p.density_db / 10)
    inband = lin[f <= band_edge]
    out = lin[f > band_edge + guard_offset]
    if inband.size == 0 or out.size == 0:
        raise ValueError("frequency axis does not cover both regions")
    ratio = out.mean() / inband.mean()
    return float(max(10 * np.log10(ratio), floor_db)) if ratio > 0 else floor_db


def papr_ccdf(w, oversample=4, thresholds_db=None):
    """CCDF of instantaneous power over mean power.

    Oversampling is done by zero-padding the spectrum. Returns
    ``(thresholds_db, probability)``.
    """
    x = w.samples if hasattr(w, "samples") else np.asarray(w)
    p_mean = np.mean(np.abs(x) ** 2)
    if p_mean == 0:
        raise ValueError("zero-power waveform")
    if oversample > 1:
        X = np.fft.fft(x)
        n = x.size
        half = (n + 1) // 2
        pad = np.concatenate([X[:half], np.zeros(n * (oversample - 1), complex), X[half:]])
        x = np.fft.ifft(pad) * oversample
    ratio_db = 10 * np.log10(np.abs(x) ** 2 / np.mean(np.abs(x) ** 2) + 1e-300)
    if thresholds_db is None:
        thresholds_db = np.arange(0.0, 13.01, 0.25)
    thresholds_db = np.asarray(thresholds_db, float)
    ccdf = (ratio_db[None, :] > thresholds_db[:, None]).mean(axis=1)
    return thresholds_db, ccdf


def papr_db(w):
    x = w.samples if hasattr(w, "samples") else np.asarray(w)
    p = np.abs(x) ** 2
    return float(10 * np.log10(p.max() / p.mean()))


def q_function(x):
    return 0.5 * special.erfc(np.asarray(x) / np.sqrt(2))


def theoretical_ber_qpsk_awgn(eb_n0_db):
    return q_function(np.sqrt(2 * 10 ** (np.asarray(eb_n0_db) / 10)))


def theoretical_sinr_angular(snr_db, theta_deg):
    if not (0 <= theta_deg < 90):
        raise ValueError(f"angle {theta_deg} outside [0, 90)")
    return snr_db - 10 * np.log10(1 + np.tan(np.radians(theta_deg)) ** 2)


def qpsk_ebn0_from_ber(ber):
    """Invert the QPSK/AWGN curve: Eb/N0 in dB that yields ``ber``."""
    x = special.erfcinv(2 * np.asarray(ber)) * np.sqrt(2)
    return 10 * np.log10(x ** 2 / 2)
