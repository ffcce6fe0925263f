"""Prototype pulses for OQAM filter banks: SRRC, PHYDYAS and IOTA.

All pulses have ``L = K * N`` taps, unit energy and even symmetry about the
pulse centre ``(L - 1) / 2``.
"""
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

SUPPORTED_K = (2, 3, 4, 6, 8, 16)

# Frequency-sampling coefficients H_1..H_{K-1} (H_0 = 1).
PHYDYAS_COEFFS = {
    2: (np.sqrt(2) / 2,),
    3: (0.911438, 0.411438),
    4: (0.971960, np.sqrt(2) / 2, 0.235147),
}


class UnsupportedDesignError(ValueError):
    """Requested filter family/parameter combination has no known design."""


class FilterKind(str, Enum):
    SRRC = "srrc"
    PHYDYAS = "phydyas"
    IOTA = "iota"


@dataclass(frozen=True)
class PrototypeFilter:
    kind: FilterKind
    K: int
    N: int
    alpha: float | None
    coeffs: np.ndarray = field(repr=False)

    def __post_init__(self):
        c = np.asarray(self.coeffs, dtype=np.float64)
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)
        if c.size != self.K * self.N:
            raise ValueError(f"filter length {c.size} != K*N = {self.K * self.N}")

    @property
    def L(self):
        return self.coeffs.size

    @property
    def center(self):
        """Sample index of the pulse centre (half-integer for even L)."""
        return (self.L - 1) / 2

    @property
    def energy(self):
        return float(np.dot(self.coeffs, self.coeffs))

    def describe(self):
        if self.kind is FilterKind.SRRC:
            return f"SRRC K={self.K} alpha={self.alpha:g} N={self.N}"
        return f"{self.kind.name} K={self.K} N={self.N}"


def _check_common(K, N):
    if K not in SUPPORTED_K:
        raise UnsupportedDesignError(f"overlap factor K={K} not in {SUPPORTED_K}")
    if N < 16 or N & (N - 1):
        raise ValueError(f"N={N} must be a power of two >= 16")


def _unit_energy(h):
    return h / np.sqrt(np.dot(h, h))


def srrc_pulse(t, alpha):
    """Continuous square-root raised-cosine pulse, symbol period 1.

    Removable singularities at ``t = 0`` and ``|t| = 1/(4 alpha)`` are
    replaced by their limits.
    """
    t = np.atleast_1d(np.asarray(t, dtype=np.float64))
    out = np.empty_like(t)
    at_zero = np.isclose(t, 0.0, atol=1e-12)
    at_pole = np.isclose(np.abs(t), 1.0 / (4.0 * alpha), atol=1e-12) & ~at_zero
    regular = ~(at_zero | at_pole)
    tr = t[regular]
    num = np.sin(np.pi * tr * (1 - alpha)) + 4 * alpha * tr * np.cos(np.pi * tr * (1 + alpha))
    den = np.pi * tr * (1 - (4 * alpha * tr) ** 2)
    out[regular] = num / den
    out[at_zero] = 1 - alpha + 4 * alpha / np.pi
    q = np.pi / (4 * alpha)
    out[at_pole] = alpha / np.sqrt(2) * ((1 + 2 / np.pi) * np.sin(q) + (1 - 2 / np.pi) * np.cos(q))
    return out


def srrc_impulse(K, N, alpha):
    """SRRC taps at N samples per symbol, truncated to K symbols, unit energy."""
    L = K * N
    t = (np.arange(L) - (L - 1) / 2) / N
    return _unit_energy(srrc_pulse(t, alpha))


def phydyas_impulse(K, N):
    try:
        H = PHYDYAS_COEFFS[K]
    except KeyError:
        raise UnsupportedDesignError(
            f"PHYDYAS coefficients are only tabulated for K in {sorted(PHYDYAS_COEFFS)}"
        ) from None
    L = K * N
    # half-sample offset keeps the taps symmetric about (L-1)/2
    u = (np.arange(L) + 0.5) / L
    h = np.ones(L)
    for i, Hi in enumerate(H, start=1):
        h += 2 * (-1) ** i * Hi * np.cos(2 * np.pi * i * u)
    return _unit_energy(h)


def iota_impulse(K, N, span=None):
    """IOTA pulse: the unit Gaussian orthogonalized in time then in frequency.

    Computed on a dense grid of ``span`` symbol periods (N samples each) with
    the symbol period scaled to sqrt(2) so that the lattice is tau0 = nu0 =
    1/sqrt(2). The result is cut symmetrically to K*N taps.
    """
    if K not in SUPPORTED_K:
        raise UnsupportedDesignError(f"IOTA not available for K={K}")
    span = span or max(32, 2 * K)
    if span % 2:
        span += 1
    total = span * N
    dt = np.sqrt(2) / N
    t = (np.arange(total) - total / 2 + 0.5) * dt
    g = 2 ** 0.25 * np.exp(-np.pi * t ** 2)

    # time-domain step: periodize |g|^2 with period tau0 = N/2 samples
    half = N // 2
    per_t = (g ** 2).reshape(-1, half).sum(axis=0)
    y = g / np.sqrt(np.tile(per_t, total // half))

    # frequency-domain step: period nu0 = 1/sqrt(2) spans total/N bins
    Y = np.fft.fft(y)
    bins = total // N
    per_f = (np.abs(Y) ** 2).reshape(-1, bins).sum(axis=0)
    z = np.fft.ifft(Y / np.sqrt(np.tile(per_f, total // bins))).real

    L = K * N
    mid = total // 2
    h = z[mid - L // 2: mid - L // 2 + L]
    h = 0.5 * (h + h[::-1])
    return _unit_energy(h)


def design_filter(kind, K, N, alpha=None):
    """Design a unit-energy prototype filter of length K*N."""
    kind = FilterKind(kind.lower() if isinstance(kind, str) else kind)
    _check_common(K, N)
    if kind is FilterKind.SRRC:
        if alpha is None:
            alpha = 2.0 / K
        if not (0.0 < alpha <= 1.0):
            raise ValueError(f"roll-off alpha={alpha} outside (0, 1]")
        h = srrc_impulse(K, N, alpha)
    else:
        if alpha is not None:
            raise ValueError(f"alpha applies to SRRC only, not {kind.name}")
        if kind is FilterKind.PHYDYAS:
            h = phydyas_impulse(K, N)
        else:
            h = iota_impulse(K, N)
    return PrototypeFilter(kind=kind, K=K, N=N, alpha=alpha, coeffs=h)


def export_csv(f, path):
    """Write ``k,coeff`` rows with 17 significant digits."""
    with open(path, "w", newline="") as fh:
        fh.write("k,coeff\n")
        for k, c in enumerate(f.coeffs):
            fh.write(f"{k},{c:.17g}\n")
