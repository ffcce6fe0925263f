"""OQAM staggering, FBMC synthesis/analysis, CP-OFDM with optional WOLA.

Grids are ``(N, M)`` arrays: row ``n`` is the subcarrier, column ``m`` the
symbol instant. FBMC instants are half a symbol period apart. Subcarrier
``n`` sits at the signed frequency ``n`` for ``n < N/2`` and ``n - N``
otherwise, so the band wraps inside the guard band rather than at DC.
"""
from dataclasses import dataclass, field, replace
from fractions import Fraction

import numpy as np

from . import kernels

_QUARTER = np.array([1, 1j, -1, -1j])


class ConfigError(ValueError):
    """Invalid system or experiment configuration."""


@dataclass(frozen=True)
class SystemConfig:
    N: int = 512
    guard_left: int = 17
    guard_right: int = 16
    dc_null: bool = True
    bandwidth: float = 10e6
    cp_fraction: Fraction = Fraction(1, 32)
    window_rolloff: float = 0.0

    def __post_init__(self):
        if self.guard_left + self.guard_right + 1 > self.N:
            raise ConfigError("guards leave no active subcarriers")
        object.__setattr__(self, "cp_fraction", Fraction(self.cp_fraction).limit_denominator(1 << 16))

    @property
    def sample_rate(self):
        return self.bandwidth

    @property
    def cp_len(self):
        n = self.cp_fraction * self.N
        if n.denominator != 1:
            raise ConfigError(f"CP length {float(n)} samples is not an integer")
        return int(n)

    @property
    def active_mask(self):
        """Boolean mask over physical subcarrier index 0..N-1."""
        f = signed_frequencies(self.N)
        lo = -self.N // 2 + self.guard_left
        hi = self.N // 2 - 1 - self.guard_right
        mask = (f >= lo) & (f <= hi)
        if self.dc_null:
            mask &= f != 0
        return mask


@dataclass
class Waveform:
    samples: np.ndarray
    sample_rate: float
    N: int
    n_symbols: int
    K: int = 0
    cp_len: int = 0
    head_cut: int = 0
    tail_cut: int = 0
    gain: float = 1.0
    frame_offsets: tuple = (0,)
    meta: dict = field(default_factory=dict)

    def __len__(self):
        return self.samples.size

    def with_samples(self, samples):
        return replace(self, samples=np.asarray(samples, dtype=np.complex128))

    @property
    def energy(self):
        return float(np.vdot(self.samples, self.samples).real)


def signed_frequencies(N):
    n = np.arange(N)
    return np.where(n < N // 2, n, n - N)


def phase_term(n, m):
    """OQAM phase j**(n+m)."""
    return _QUARTER[(np.asarray(n) + np.asarray(m)) % 4]


def qam_to_oqam(c):
    """Real part at even instants, imaginary part at the following odd one."""
    c = np.asarray(c)
    a = np.empty((c.shape[0], 2 * c.shape[1]))
    a[:, 0::2] = c.real
    a[:, 1::2] = c.imag
    return a


def oqam_to_qam(a):
    a = np.asarray(a, dtype=np.float64)
    if a.shape[1] % 2:
        raise ValueError(f"OQAM grid has odd number of instants ({a.shape[1]})")
    return a[:, 0::2] + 1j * a[:, 1::2]


def frame_length(n_symbols, f):
    return f.L + (n_symbols - 1) * (f.N // 2)


def basis_function(f, n, m):
    """Return ``(start, values)`` of the shifted pulse Q_{n,m} on its support."""
    hop = f.N // 2
    start = m * hop
    k = start + np.arange(f.L)
    fn = signed_frequencies(f.N)[n % f.N]
    carrier = np.exp(2j * np.pi * fn * (k - f.center) / f.N)
    return start, f.coeffs * carrier * phase_term(n, m)


def _check_grid(a, f):
    a = np.asarray(a, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] != f.N:
        raise ValueError(f"grid shape {a.shape} does not match N={f.N}")
    return np.ascontiguousarray(a)


def _fbmc_waveform(x, f, M, sample_rate):
    return Waveform(samples=x, sample_rate=sample_rate, N=f.N, n_symbols=M, K=f.K)


def fbmc_modulate_direct(a, f, sample_rate=1.0):
    """Literal superposition of a_{n,m} Q_{n,m}[k]; O(N M L) reference."""
    a = _check_grid(a, f)
    freqs = signed_frequencies(f.N).astype(np.float64)
    x = kernels.direct_synthesis(a, np.ascontiguousarray(f.coeffs), freqs, f.center, f.N // 2)
    return _fbmc_waveform(np.asarray(x), f, a.shape[1], sample_rate)


def _subcarrier_phase(f, M):
    """Per-(n, m) factor j^{n+m} (-1)^{f_n m} e^{-j 2 pi f_n c / N}."""
    N = f.N
    fn = signed_frequencies(N)
    n = np.arange(N)[:, None]
    m = np.arange(M)[None, :]
    sign = np.where((fn[:, None] * m) % 2 == 0, 1.0, -1.0)
    centre = np.exp(-2j * np.pi * fn * f.center / N)[:, None]
    return phase_term(n, m) * sign * centre


def fbmc_modulate_fast(a, f, sample_rate=1.0):
    """IFFT + polyphase filtering + overlap-add at stride N/2."""
    a = _check_grid(a, f)
    N, M = a.shape
    X = a * _subcarrier_phase(f, M)
    s = N * np.fft.ifft(X, axis=0)                       # (N, M), periodic in time
    segments = np.tile(s.T, (1, f.K)) * f.coeffs         # (M, L)
    x = kernels.overlap_add(np.ascontiguousarray(segments), N // 2)
    return _fbmc_waveform(np.asarray(x), f, M, sample_rate)


fbmc_modulate = fbmc_modulate_fast


def _restore_cuts(w):
    if isinstance(w, Waveform) and (w.head_cut or w.tail_cut):
        return np.concatenate([np.zeros(w.head_cut, complex), w.samples, np.zeros(w.tail_cut, complex)])
    return w.samples if isinstance(w, Waveform) else np.asarray(w, dtype=np.complex128)


def fbmc_demodulate(w, f, n_symbols=None):
    """Inner products <y, Q_{n,m}> / ||h||^2 for every lattice point.

    Accepts a :class:`Waveform` (truncated tails are zero-restored) or a bare
    sample array with ``n_symbols``.
    """
    y = np.ascontiguousarray(_restore_cuts(w), dtype=np.complex128)
    hop = f.N // 2
    if n_symbols is None:
        if isinstance(w, Waveform):
            n_symbols = w.n_symbols
        else:
            extra = y.size - f.L
            if extra < 0 or extra % hop:
                raise ValueError(f"waveform length {y.size} is not L + (M-1)N/2")
            n_symbols = extra // hop + 1
    if y.size != frame_length(n_symbols, f):
        raise ValueError(f"waveform length {y.size} != frame length {frame_length(n_symbols, f)}")
    folded = kernels.polyphase_fold(y, np.ascontiguousarray(f.coeffs), n_symbols, hop, f.N)
    spec = np.fft.fft(np.asarray(folded), axis=1).T      # (N, M)
    return spec * np.conj(_subcarrier_phase(f, n_symbols)) / f.energy


def cp_ofdm_modulate(c, cfg):
    """Per symbol: inverse DFT (1/N scaled) and cyclic prefix."""
    c = np.asarray(c, dtype=np.complex128)
    if c.shape[0] != cfg.N:
        raise ValueError(f"grid has {c.shape[0]} subcarriers, config N={cfg.N}")
    cp = cfg.cp_len
    body = np.fft.ifft(c, axis=0)
    sym = np.concatenate([body[cfg.N - cp:], body], axis=0) if cp else body
    return Waveform(samples=sym.T.reshape(-1), sample_rate=cfg.sample_rate, N=cfg.N,
                    n_symbols=c.shape[1], cp_len=cp)


def cp_ofdm_demodulate(w, cfg):
    cp = cfg.cp_len
    S = cfg.N + cp
    y = w.samples if isinstance(w, Waveform) else np.asarray(w)
    M = w.n_symbols if isinstance(w, Waveform) else y.size // S
    if y.size < M * S:
        raise ValueError(f"waveform length {y.size} shorter than {M} symbols of {S}")
    blocks = y[:M * S].reshape(M, S)[:, cp:]
    return np.fft.fft(blocks, axis=1).T


def _rc_ramp(W):
    i = np.arange(W)
    return 0.5 * (1 - np.cos(np.pi * (i + 0.5) / W))


def wola_window(w, cfg):
    """Raised-cosine edge windowing with overlap-add of a W-sample cyclic suffix.

    The rising ramp sits in the first W samples of each cyclic prefix and the
    falling suffix overlaps the next symbol's prefix, so the receiver's DFT
    window is untouched. ``W = round(window_rolloff * N)`` must not exceed
    the CP. The output is scaled so the expected energy per symbol is
    unchanged; the factor is kept in ``Waveform.gain``.
    """
    W = int(round(cfg.window_rolloff * cfg.N))
    if W == 0:
        return w
    cp = w.cp_len
    if W > cp:
        raise ConfigError(f"window extension {W} samples exceeds CP length {cp}")
    S = cfg.N + cp
    M = w.n_symbols
    sym = w.samples[:M * S].reshape(M, S)
    body = sym[:, cp:]
    ext = np.concatenate([sym, body[:, :W]], axis=1)
    ramp = _rc_ramp(W)
    win = np.ones(S + W)
    win[:W] = ramp
    win[S:] = 1 - ramp
    ext = ext * win
    g = np.sqrt(S / (S - W + np.sum(ramp ** 2) + np.sum((1 - ramp) ** 2)))
    out = np.zeros(M * S + W, dtype=np.complex128)
    for t in range(M):
        out[t * S:t * S + S + W] += ext[t]
    out *= g
    return replace(w, samples=out, gain=w.gain * g, meta={**w.meta, "wola_len": W})


def truncate_tails(w, K, N):
    """Drop (K/2 - 1) N samples from each end of an FBMC frame."""
    cut = int(round((K / 2 - 1) * N))
    if cut == 0:
        return w
    if len(w) <= 2 * cut:
        raise ValueError(f"frame of {len(w)} samples too short to cut {cut} per end")
    return replace(w, samples=w.samples[cut:len(w) - cut],
                   head_cut=w.head_cut + cut, tail_cut=w.tail_cut + cut)


def write_waveform(w, path):
    """Write ``path`` (interleaved little-endian float64 re,im) plus ``path.txt``."""
    path = str(path)
    inter = np.empty(2 * len(w), dtype="<f8")
    inter[0::2] = w.samples.real
    inter[1::2] = w.samples.imag
    inter.tofile(path)
    lines = [
        f"sample_rate={w.sample_rate!r}",
        f"N={w.N}",
        f"K={w.K}",
        f"n_symbols={w.n_symbols}",
        f"cp_len={w.cp_len}",
        f"head_cut={w.head_cut}",
        f"tail_cut={w.tail_cut}",
        f"gain={w.gain!r}",
        "frame_offsets=" + ",".join(str(o) for o in w.frame_offsets),
    ]
    with open(path + ".txt", "w") as fh:
        fh.write("\n".join(lines) + "\n")


def read_waveform(path):
    path = str(path)
    raw = np.fromfile(path, dtype="<f8")
    meta = {}
    with open(path + ".txt") as fh:
        for line in fh:
            if "=" in line:
                key, val = line.strip().split("=", 1)
                meta[key] = val
    ints = {k: int(meta[k]) for k in ("N", "K", "n_symbols", "cp_len", "head_cut", "tail_cut")}
    offsets = tuple(int(v) for v in meta.get("frame_offsets", "0").split(",") if v)
    return Waveform(samples=raw[0::2] + 1j * raw[1::2], sample_rate=float(meta["sample_rate"]),
                    gain=float(meta.get("gain", 1.0)), frame_offsets=offsets, **ints)


def export_grid_csv(grid, path):
    """Write a grid as ``n,m,re,im`` rows (nonzero entries only)."""
    grid = np.asarray(grid)
    n, m = np.nonzero(grid)
    with open(path, "w") as fh:
        fh.write("n,m,re,im\n")
        for i, j in zip(n, m):
            v = complex(grid[i, j])
            fh.write(f"{i},{j},{v.real:.17g},{v.imag:.17g}\n")
