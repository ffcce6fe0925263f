"""Dual-polarization multiplexing of an OQAM lattice.

Structure I alternates polarization with the OQAM instant, Structure II with
the subcarrier, Structure III with both (checkerboard). Parity is taken on
absolute indices, guards and DC included.
"""
from dataclasses import dataclass
from enum import Enum

import numpy as np

from . import modem


class IntegrityError(ValueError):
    """Polarized grids overlap where they should be disjoint."""


class DpStructure(str, Enum):
    I = "I"
    II = "II"
    III = "III"

    @classmethod
    def parse(cls, s):
        if isinstance(s, cls):
            return s
        key = str(s).upper().replace("STRUCTURE", "").replace("_", "").replace("S", "", 1).strip()
        return cls({"1": "I", "2": "II", "3": "III"}.get(key, key))


def h_mask(shape, s):
    """Boolean mask of lattice points assigned to the H polarization."""
    s = DpStructure.parse(s)
    n = np.arange(shape[0])[:, None]
    m = np.arange(shape[1])[None, :]
    if s is DpStructure.I:
        sel = m % 2 == 0
    elif s is DpStructure.II:
        sel = n % 2 == 0
    else:
        sel = (n + m) % 2 == 0
    return np.broadcast_to(sel, shape).copy()


@dataclass
class PolarizedOqamGrid:
    aH: np.ndarray
    aV: np.ndarray
    structure: DpStructure


@dataclass
class PolarizedWaveform:
    h: modem.Waveform
    v: modem.Waveform

    def __post_init__(self):
        if len(self.h) != len(self.v):
            raise ValueError(f"polarization lengths differ: {len(self.h)} vs {len(self.v)}")
        if self.h.sample_rate != self.v.sample_rate:
            raise ValueError("polarization sample rates differ")

    def map(self, fn):
        return PolarizedWaveform(fn(self.h), fn(self.v))

    def with_samples(self, xh, xv):
        return PolarizedWaveform(self.h.with_samples(xh), self.v.with_samples(xv))

    @property
    def energy(self):
        return self.h.energy + self.v.energy


def dp_split(a, s):
    s = DpStructure.parse(s)
    a = np.asarray(a, dtype=np.float64)
    mask = h_mask(a.shape, s)
    return PolarizedOqamGrid(aH=np.where(mask, a, 0.0), aV=np.where(mask, 0.0, a), structure=s)


def dp_merge(p):
    """Recombine a split grid; rejects any entry that sits on the wrong polarization."""
    mask = h_mask(p.aH.shape, p.structure)
    if np.any(p.aH[~mask] != 0) or np.any(p.aV[mask] != 0):
        raise IntegrityError(f"polarized grids violate the Structure {p.structure.value} support pattern")
    return p.aH + p.aV


def dp_modulate(p, f, sample_rate=1.0):
    if p.aH.shape != p.aV.shape:
        raise ValueError(f"grid shapes differ: {p.aH.shape} vs {p.aV.shape}")
    return PolarizedWaveform(modem.fbmc_modulate_fast(p.aH, f, sample_rate),
                             modem.fbmc_modulate_fast(p.aV, f, sample_rate))


def dp_demodulate(rw, f, s):
    """Demodulate both branches and keep each point from its assigned polarization."""
    rH = modem.fbmc_demodulate(rw.h, f)
    rV = modem.fbmc_demodulate(rw.v, f)
    return np.where(h_mask(rH.shape, s), rH, rV)


def write_polarized(pw, stem):
    modem.write_waveform(pw.h, f"{stem}.h.iq")
    modem.write_waveform(pw.v, f"{stem}.v.iq")


def read_polarized(stem):
    return PolarizedWaveform(modem.read_waveform(f"{stem}.h.iq"), modem.read_waveform(f"{stem}.v.iq"))
