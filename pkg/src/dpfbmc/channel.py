"""Tapped-delay-line fading, cross-polarization leakage, noise and offsets."""
import csv
import math
from dataclasses import dataclass
from enum import Enum

import numpy as np


class Fading(str, Enum):
    NONE = "none"
    RAYLEIGH = "rayleigh"
    RICEAN = "ricean"


@dataclass(frozen=True)
class Tap:
    tau_ns: float
    power_db: float
    fading: Fading = Fading.RAYLEIGH
    k_rice_db: float = -math.inf


@dataclass(frozen=True)
class ChannelProfile:
    name: str
    taps: tuple
    declared_rms_ns: float | None = None

    def __post_init__(self):
        delays = [t.tau_ns for t in self.taps]
        if not self.taps:
            raise ValueError("profile has no taps")
        if any(d < 0 for d in delays) or delays != sorted(delays):
            raise ValueError(f"profile {self.name!r}: delays must be nonnegative and ascending")

    @property
    def powers(self):
        return np.array([10 ** (t.power_db / 10) for t in self.taps])

    @property
    def delays_ns(self):
        return np.array([t.tau_ns for t in self.taps])


def _ray(*pairs):
    return tuple(Tap(t, p, Fading.RAYLEIGH) for t, p in pairs)


_BUILTIN = {
    "ag_los": ChannelProfile("ag_los", (
        Tap(0, 0, Fading.RICEAN, 30), Tap(45, -12, Fading.RICEAN, 30), Tap(200, -22.3, Fading.RICEAN, 30),
    ), 18),
    "pedestrian_a": ChannelProfile("pedestrian_a", (Tap(0, 0, Fading.RICEAN, 10),)
                                   + _ray((110, -9.7), (190, -19.2), (410, -22.8)), 46),
    "pedestrian_b": ChannelProfile("pedestrian_b", _ray(
        (0, 0), (200, -0.9), (800, -4.9), (1200, -8), (2300, -7.8), (3700, -23.9)), 633),
    "vehicular_b": ChannelProfile("vehicular_b", _ray(
        (0, -2.5), (300, 0), (8900, -12.8), (12900, -10), (17100, -25.2), (20000, -16)), 4000),
    "awgn": ChannelProfile("awgn", (Tap(0, 0, Fading.NONE),), 0),
}

DEFAULT_XPD_DB = {"ag_los": 15.0, "pedestrian_a": 10.0, "pedestrian_b": 5.0, "vehicular_b": 3.0, "awgn": math.inf}


def builtin_profile(name):
    try:
        return _BUILTIN[name]
    except KeyError:
        raise ValueError(f"unknown channel profile {name!r}; choose from {sorted(_BUILTIN)}") from None


def profile_names():
    return sorted(_BUILTIN)


def load_profile_csv(path, name=None, declared_rms_ns=None):
    """Read ``tau_ns,power_db,fading,k_rice_db`` rows."""
    taps = []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            k = row.get("k_rice_db", "").strip()
            taps.append(Tap(float(row["tau_ns"]), float(row["power_db"]),
                            Fading(row["fading"].strip().lower()),
                            float(k) if k else -math.inf))
    return ChannelProfile(name or str(path), tuple(taps), declared_rms_ns)


def rms_delay_spread(p):
    """Power-weighted RMS delay spread in ns."""
    w = p.powers / p.powers.sum()
    tau = p.delays_ns
    mean = np.dot(w, tau)
    return float(np.sqrt(np.dot(w, (tau - mean) ** 2)))


@dataclass
class DualPolChannelRealization:
    hHH: np.ndarray
    hVV: np.ndarray
    hHV: np.ndarray
    hVH: np.ndarray
    xpd_db: float
    seed: object = None

    @property
    def n_taps(self):
        return self.hHH.size


def _cn(rng, size, var):
    return np.sqrt(var / 2) * (rng.standard_normal(size) + 1j * rng.standard_normal(size))


def _draw_taps(p, delay_idx, rng, n):
    h = np.zeros(n, dtype=np.complex128)
    pw = p.powers / p.powers.sum()
    for tap, d, pk in zip(p.taps, delay_idx, pw):
        if tap.fading is Fading.NONE:
            h[d] += np.sqrt(pk)
        elif tap.fading is Fading.RICEAN:
            kr = 10 ** (tap.k_rice_db / 10)
            los = np.sqrt(pk * kr / (1 + kr)) * np.exp(2j * np.pi * rng.random())
            h[d] += los + _cn(rng, 1, pk / (1 + kr))[0]
        else:
            h[d] += _cn(rng, 1, pk)[0]
    return h


def quantized_delays(p, sample_rate):
    return np.rint(p.delays_ns * 1e-9 * sample_rate).astype(int)


def realize_channel(p, xpd_db, sample_rate, rng):
    """Draw one block-fading dual-polarization realization.

    ``rng`` is a numpy Generator or anything accepted by ``default_rng``.
    Co-polar taps follow the profile's fading law, independently for HH and
    VV. Cross-polar taps are independent Rayleigh with the same delay
    profile scaled by 1/XPD.
    """
    if isinstance(xpd_db, float) and math.isnan(xpd_db):
        raise ValueError("XPD is NaN")
    seed = None if isinstance(rng, np.random.Generator) else rng
    rng = np.random.default_rng(rng)
    d = quantized_delays(p, sample_rate)
    n = int(d.max()) + 1
    hHH = _draw_taps(p, d, rng, n)
    hVV = _draw_taps(p, d, rng, n)
    if math.isinf(xpd_db) and xpd_db > 0:
        hHV = np.zeros(n, complex)
        hVH = np.zeros(n, complex)
    else:
        x = 10 ** (-xpd_db / 10)
        pw = p.powers / p.powers.sum()
        hHV = np.zeros(n, complex)
        hVH = np.zeros(n, complex)
        for di, pk in zip(d, pw):
            hHV[di] += _cn(rng, 1, pk * x)[0]
            hVH[di] += _cn(rng, 1, pk * x)[0]
    return DualPolChannelRealization(hHH, hVV, hHV, hVH, xpd_db, seed)


def convolve_truncated(x, h):
    """Linear convolution cut to the input length (the tail spills past the frame)."""
    if not np.any(h):
        return np.zeros_like(x)
    return np.convolve(x, h)[:x.size]


def apply_channel(w, h):
    return w.with_samples(convolve_truncated(w.samples, h))


def apply_dual_pol_channel(pw, ch):
    xh, xv = pw.h.samples, pw.v.samples
    rh = convolve_truncated(xh, ch.hHH) + convolve_truncated(xv, ch.hVH)
    rv = convolve_truncated(xv, ch.hVV) + convolve_truncated(xh, ch.hHV)
    return pw.with_samples(rh, rv)


def apply_angular_mismatch(pw, theta_deg):
    if not (0 <= theta_deg < 90):
        raise ValueError(f"mismatch angle {theta_deg} outside [0, 90)")
    c, s = math.cos(math.radians(theta_deg)), math.sin(math.radians(theta_deg))
    xh, xv = pw.h.samples, pw.v.samples
    return pw.with_samples(c * xh + s * xv, c * xv + s * xh)


def noise_variance(energy, n_info_bits, eb_n0_db):
    """Per-sample complex noise variance N0 for total transmitted energy ``energy``."""
    if energy <= 0:
        raise ValueError("signal has zero power")
    if n_info_bits <= 0:
        raise ValueError("no information bits")
    return energy / (n_info_bits * 10 ** (eb_n0_db / 10))


def awgn(size, sigma2, rng):
    return _cn(rng, size, sigma2)


def apply_awgn(w, eb_n0_db, n_info_bits, rng, energy=None):
    """Add complex white Gaussian noise at the given Eb/N0.

    ``n_info_bits`` counts only data bits, so energy spent on CP, pilots or
    guard overhead lowers the effective SNR. ``energy`` defaults to the
    measured waveform energy; pass the total over both polarizations for
    dual-polarization links.
    """
    if math.isinf(eb_n0_db) and eb_n0_db > 0:
        return w
    e = w.energy if energy is None else energy
    s2 = noise_variance(e, n_info_bits, eb_n0_db)
    return w.with_samples(w.samples + awgn(len(w), s2, rng))


def apply_cfo(w, cfo_norm, N):
    if not abs(cfo_norm) < 0.5:
        raise ValueError(f"|CFO| = {abs(cfo_norm)} must be below 0.5")
    if cfo_norm == 0:
        return w
    k = np.arange(len(w))
    return w.with_samples(w.samples * np.exp(2j * np.pi * cfo_norm * k / N))


def apply_cto(w, cto_samples):
    """Receiver frame start moved ``cto_samples`` late (negative: early); zero fill."""
    d = int(cto_samples)
    n = len(w)
    if abs(d) >= n:
        raise ValueError(f"timing offset {d} outside frame of {n} samples")
    if d == 0:
        return w
    y = np.zeros(n, dtype=np.complex128)
    if d > 0:
        y[:n - d] = w.samples[d:]
    else:
        y[-d:] = w.samples[:n + d]
    return w.with_samples(y)


def frequency_response(h, N):
    """Per-subcarrier response (physical index order) of a tap vector."""
    h = np.asarray(h, dtype=np.complex128)
    pad = (-h.size) % N
    return np.fft.fft(np.concatenate([h, np.zeros(pad, complex)]).reshape(-1, N).sum(axis=0))
