"""Scattered pilots, auxiliary-pilot interference cancellation, LS estimation
with transform-domain interpolation, one-tap ZF and the genie XPD canceller.

A pilot occupies one QAM cell ``(n_p, t_p)``. CP-OFDM puts a unit QPSK value
there. FBMC splits the cell into the OQAM instants ``2 t_p`` (pilot) and
``2 t_p + 1`` (auxiliary symbol cancelling the pilot's intrinsic
interference). Dual-polarization FBMC uses both instants as pilots, one per
polarization, so every system spends the same number of cells on pilots.
"""
import json
from dataclasses import dataclass

import numpy as np

from . import channel, modem
from .dp import DpStructure, PolarizedWaveform, h_mask
from .interference import full_neighborhood

PILOT_SEED = 20170514


class UncancellableError(ValueError):
    """Auxiliary position has a vanishing localization coefficient."""


@dataclass(frozen=True)
class PilotLayout:
    subcarriers: tuple
    instants: tuple
    values: np.ndarray
    seed: int = PILOT_SEED

    @property
    def n_pilots(self):
        return len(self.subcarriers) * len(self.instants)

    def cells(self):
        """Iterate ``(n, t, value)`` over QAM pilot cells."""
        for j, t in enumerate(self.instants):
            for i, n in enumerate(self.subcarriers):
                yield n, t, self.values[i, j]

    def qam_mask(self, N, Mq):
        mask = np.zeros((N, Mq), dtype=bool)
        if self.subcarriers and self.instants:
            mask[np.ix_(list(self.subcarriers), list(self.instants))] = True
        return mask

    def oqam_mask(self, N, M):
        """Both OQAM instants of every pilot cell."""
        return np.repeat(self.qam_mask(N, M // 2), 2, axis=1)

    def to_dict(self):
        return {"subcarriers": list(map(int, self.subcarriers)), "instants": list(map(int, self.instants)),
                "seed": int(self.seed),
                "values_re": self.values.real.tolist(), "values_im": self.values.imag.tolist()}

    def to_json(self):
        return json.dumps(self.to_dict(), indent=1, sort_keys=True)

    @classmethod
    def from_dict(cls, d):
        vals = np.asarray(d["values_re"]) + 1j * np.asarray(d["values_im"])
        return cls(tuple(d["subcarriers"]), tuple(d["instants"]), vals.reshape(len(d["subcarriers"]), -1),
                   d.get("seed", PILOT_SEED))


def empty_layout():
    return PilotLayout((), (), np.zeros((0, 0), complex))


def make_pilot_layout(cfg, n_qam_symbols, n_pilots=30, period=4, seed=PILOT_SEED):
    """Equally spaced pilot subcarriers across the occupied band.

    Spacing is ``floor(W / n_pilots)`` where ``W`` counts the occupied band
    including the DC position; the comb is centred and must avoid DC.
    """
    N = cfg.N
    fn = modem.signed_frequencies(N)
    lo = -N // 2 + cfg.guard_left
    hi = N // 2 - 1 - cfg.guard_right
    width = hi - lo + 1
    step = width // n_pilots
    if step < 1:
        raise ValueError(f"{n_pilots} pilots do not fit in {width} subcarriers")
    first = lo + (width - 1 - step * (n_pilots - 1)) // 2
    freqs = first + step * np.arange(n_pilots)
    if cfg.dc_null and np.any(freqs == 0):
        freqs = np.where(freqs >= 0, freqs + 1, freqs)
    if freqs.max() > hi:
        raise ValueError("pilot comb collides with the guard band")
    phys = tuple(int(np.flatnonzero(fn == f)[0]) for f in freqs)
    instants = tuple(range(0, n_qam_symbols, period))
    rng = np.random.default_rng(seed)
    bits = rng.integers(0, 2, size=(n_pilots, len(instants), 2))
    values = ((1 - 2 * bits[..., 0]) + 1j * (1 - 2 * bits[..., 1])) / np.sqrt(2)
    return PilotLayout(phys, instants, values, seed)


def place_pilots(grid, layout, active_mask=None):
    """Write pilot values into a QAM grid."""
    g = np.array(grid, dtype=np.complex128, copy=True)
    for n, t, v in layout.cells():
        if active_mask is not None and not active_mask[n]:
            raise ValueError(f"pilot at subcarrier {n} falls on a guard or DC position")
        g[n, t] = v
    return g


def place_oqam_pilots(a, layout, active_mask=None, dual=False):
    """Write pilot reals into an OQAM grid.

    The real part of each pilot value goes to instant ``2t``; with ``dual``
    the imaginary part goes to ``2t + 1`` as a second pilot. Otherwise that
    instant is left for :func:`insert_auxiliary_pilots`.
    """
    out = np.array(a, dtype=np.float64, copy=True)
    for n, t, v in layout.cells():
        if active_mask is not None and not active_mask[n]:
            raise ValueError(f"pilot at subcarrier {n} falls on a guard or DC position")
        out[n, 2 * t] = v.real
        out[n, 2 * t + 1] = v.imag if dual else 0.0
    return out


def insert_auxiliary_pilots(a, layout, table, dn=2, dm=2):
    """Set the auxiliary symbol at ``(n_p, 2t_p + 1)`` to cancel interference at each pilot.

    The value solves ``sum over the box of a * Q == 0`` at the pilot with
    the box ``|d| <= dn, |e| <= dm`` around it.
    """
    out = np.array(a, dtype=np.float64, copy=True)
    N, M = out.shape
    tt = table.for_parity(0)
    q_aux = tt.at(0, 1)
    if abs(q_aux) < 1e-9:
        raise UncancellableError(f"localization coefficient at the auxiliary position is {q_aux}")
    hood = [o for o in full_neighborhood(dn, dm) if o != (0, 1)]
    for n, t, _ in layout.cells():
        m0 = 2 * t
        acc = 0j
        for d, e in hood:
            m = m0 + e
            if 0 <= m < M:
                acc += out[(n + d) % N, m] * tt.at(d, e)
        out[n, m0 + 1] = (-acc / q_aux).real
    return out


@dataclass
class ChannelEstimate:
    gains: np.ndarray
    method: str


def _tap_matrix(freqs, N, n_taps):
    k = np.arange(n_taps)
    return np.exp(-2j * np.pi * np.outer(freqs, k) / N)


def dft_interpolate(sub_idx, gains, N, n_taps):
    """Least-squares fit of ``n_taps`` integer-delay taps to the pilot gains,
    evaluated on all N subcarriers."""
    fn = modem.signed_frequencies(N)
    n_taps = max(1, min(n_taps, len(sub_idx)))
    A = _tap_matrix(fn[np.asarray(sub_idx)], N, n_taps)
    taps, *_ = np.linalg.lstsq(A, np.asarray(gains), rcond=None)
    return _tap_matrix(fn, N, n_taps) @ taps


def ls_estimate(r, pilot_n, pilot_m, pilot_values, n_taps, groups=None, method="LS_DFT"):
    """LS gains r/p at the pilots, transform-domain interpolation across
    subcarriers, nearest-pilot-instant hold across time.

    Pilots sharing a ``groups`` label (default: their instant ``m``) are
    interpolated together; the group sits at the mean instant of its pilots.
    """
    r = np.asarray(r)
    N, M = r.shape
    pilot_n = np.asarray(pilot_n)
    pilot_m = np.asarray(pilot_m)
    pilot_values = np.asarray(pilot_values)
    if pilot_n.size == 0:
        raise ValueError("no pilots")
    if np.any(np.abs(pilot_values) == 0):
        raise ValueError("pilot with zero magnitude")
    groups = pilot_m if groups is None else np.asarray(groups)
    ls = r[pilot_n, pilot_m] / pilot_values
    labels = np.unique(groups)
    centres = np.empty(labels.size)
    per_group = np.empty((labels.size, N), dtype=np.complex128)
    for i, g in enumerate(labels):
        sel = groups == g
        centres[i] = pilot_m[sel].mean()
        per_group[i] = dft_interpolate(pilot_n[sel], ls[sel], N, n_taps)
    nearest = np.abs(np.arange(M)[:, None] - centres[None, :]).argmin(axis=1)
    return ChannelEstimate(per_group[nearest].T, method)


def pilot_positions(layout, system, structure=None, M=None):
    """Return ``(n, m, value, on_h)`` arrays of the pilot lattice points.

    ``system`` is ``"ofdm"`` (QAM cells), ``"fbmc"`` or ``"dp"`` (OQAM
    instants). ``on_h`` marks which polarization carries each DP pilot.
    """
    n, m, v = [], [], []
    for sc, t, val in layout.cells():
        if system == "ofdm":
            n.append(sc); m.append(t); v.append(val)
        elif system == "fbmc":
            n.append(sc); m.append(2 * t); v.append(val.real)
        else:
            n += [sc, sc]; m += [2 * t, 2 * t + 1]; v += [val.real, val.imag]
    n, m, v = np.array(n, int), np.array(m, int), np.array(v)
    if system == "dp":
        on_h = h_mask((int(n.max()) + 1, int(m.max()) + 1), DpStructure.parse(structure))[n, m]
    else:
        on_h = np.ones(n.size, dtype=bool)
    return n, m, v, on_h


def ls_estimate_layout(r, layout, system, n_taps, structure=None):
    """LS-DFT estimate for a whole grid; DP grids get one estimate per polarization."""
    n, m, v, on_h = pilot_positions(layout, system, structure)
    if system != "dp":
        return ls_estimate(r, n, m, v, n_taps)
    t = m // 2
    gh = ls_estimate(r, n[on_h], m[on_h], v[on_h], n_taps, t[on_h]).gains
    gv = ls_estimate(r, n[~on_h], m[~on_h], v[~on_h], n_taps, t[~on_h]).gains
    return ChannelEstimate(np.where(h_mask(r.shape, structure), gh, gv), "LS_DFT")


def perfect_channel_estimate(h, N, M, gain=1.0):
    """Exact per-subcarrier response of the realized taps, constant in time."""
    H = gain * channel.frequency_response(h, N)
    return ChannelEstimate(np.repeat(H[:, None], M, axis=1), "PCK")


def perfect_dp_estimate(ch, N, M, structure, gain=1.0):
    gh = perfect_channel_estimate(ch.hHH, N, M, gain).gains
    gv = perfect_channel_estimate(ch.hVV, N, M, gain).gains
    return ChannelEstimate(np.where(h_mask((N, M), structure), gh, gv), "PCK")


def zf_equalize(r, est, tol=1e-12):
    """One-tap division; returns ``(equalized, erased)`` with erased points set to 0."""
    g = est.gains if isinstance(est, ChannelEstimate) else np.asarray(est)
    erased = ~(np.abs(g) >= tol)
    safe = np.where(erased, 1.0, g)
    out = np.where(erased, 0.0, np.asarray(r) / safe)
    return out, erased


def xpol_cancel_ideal(rw, ch, aH, aV, f):
    """Subtract the re-synthesized cross-polar contributions from both branches.

    Genie receiver: needs the realization and the transmitted grids.
    """
    out_h, out_v = rw.h.samples, rw.v.samples
    lo = rw.h.head_cut
    hi = lo + len(rw.h)
    if np.any(ch.hVH) and np.any(aV):
        xv = modem.fbmc_modulate_fast(aV, f).samples[lo:hi]
        out_h = out_h - channel.convolve_truncated(xv, ch.hVH)
    if np.any(ch.hHV) and np.any(aH):
        xh = modem.fbmc_modulate_fast(aH, f).samples[lo:hi]
        out_v = out_v - channel.convolve_truncated(xh, ch.hHV)
    return PolarizedWaveform(rw.h.with_samples(out_h), rw.v.with_samples(out_v))
