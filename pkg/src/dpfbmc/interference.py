"""Localization function of a prototype filter and intrinsic-interference sums.

Entry ``(d, e)`` of a table is the inner product of the basis function at
``(n' + d, m' + e)`` with the one at the reference point ``(n', m')``.
Tables are translation invariant in ``n'``; a shift of ``m'`` by one instant
multiplies the entry by ``(-1)**d``, so tables carry the parity of ``m'``.
"""
from dataclasses import dataclass

import numpy as np

from . import filters, modem
from .dp import DpStructure, PolarizedOqamGrid, h_mask

J = 1j

# Reference values, rows d = -2..2, columns e = -3..3.
REFERENCE_TABLES = {
    ("iota", 4): np.array([
        [0.0194, 0, -0.0413, 0, 0.0413, 0, 0.0194],
        [-0.0116, -0.0413, -0.2327, -0.4378, -0.2327, -0.0413, -0.0116],
        [0.0194, 0, -0.4380, 0, 0.4380, 0, 0.0194],
        [-0.0116, 0.0413, -0.2327, 0.4378, -0.2327, 0.0413, -0.0116],
        [0, 0, -0.0413, 0, 0.0413, 0, 0],
    ]),
    ("phydyas", 4): np.array([
        [0.064, 0, 0, 0, 0, 0, 0.064],
        [-0.044, -0.125, -0.205, -0.239, -0.205, -0.125, -0.044],
        [0.064, 0, -0.564, 0, 0.564, 0, 0.064],
        [-0.044, 0.125, -0.205, 0.239, -0.205, 0.125, -0.044],
        [0, 0, 0, 0, 0, 0, 0],
    ]),
    ("srrc", 4): np.array([
        [0.1122, 0, 0, 0, 0, 0, 0.1122],
        [-0.095, -0.1263, -0.15, -0.1589, -0.15, -0.1260, -0.095],
        [0.1122, 0, -0.6015, 0, 0.6015, 0, 0.1122],
        [-0.095, 0.1263, -0.15, 0.1589, -0.15, 0.1260, -0.095],
        [0, 0, 0, 0, 0, 0, 0],
    ]),
    ("srrc", 8): np.array([
        [0.1857, 0, 0, 0, 0, 0, 0.1857],
        [-0.0646, -0.0695, -0.0725, -0.0735, -0.072, -0.0694, -0.0646],
        [0.1857, 0, -0.6278, 0, 0.627, 0, 0.1857],
        [-0.0646, 0.0695, -0.0725, 0.0735, -0.072, 0.0694, -0.0646],
        [0, 0, 0, 0, 0, 0, 0],
    ]),
}


def reference_table(kind, K):
    """Reference entries as a complex matrix (imaginary off-center, 1 at the center)."""
    t = REFERENCE_TABLES[(kind, K)] * J
    t[2, 3] = 1
    return t


@dataclass(frozen=True)
class LocalizationTable:
    delta_n: int
    delta_m: int
    entries: np.ndarray
    descriptor: str
    m_parity: int = 0

    def at(self, dn, dm, m_ref=None):
        """Entry for offset ``(dn, dm)``; ``m_ref`` re-targets the parity of m'."""
        if abs(dn) > self.delta_n or abs(dm) > self.delta_m:
            return 0j
        v = self.entries[dn + self.delta_n, dm + self.delta_m]
        if m_ref is not None and (m_ref - self.m_parity) % 2 and dn % 2:
            v = -v
        return v

    def for_parity(self, m_parity):
        if (m_parity - self.m_parity) % 2 == 0:
            return self
        d = np.arange(-self.delta_n, self.delta_n + 1)
        sign = np.where(d % 2, -1.0, 1.0)[:, None]
        return LocalizationTable(self.delta_n, self.delta_m, self.entries * sign,
                                 self.descriptor, m_parity % 2)


def localization_table(f, dn, dm, m_parity=0):
    """Exact inner products around an interior reference point."""
    if dn > 4 or dm > 8:
        raise ValueError(f"neighborhood ({dn}, {dm}) exceeds supported bounds (4, 8)")
    if dn >= f.N // 4:
        raise ValueError(f"delta_n={dn} too large for N={f.N}")
    n0 = f.N // 4
    m0 = 2 * dm + (m_parity % 2)
    s0, q0 = modem.basis_function(f, n0, m0)
    entries = np.zeros((2 * dn + 1, 2 * dm + 1), dtype=np.complex128)
    for i, d in enumerate(range(-dn, dn + 1)):
        for j, e in enumerate(range(-dm, dm + 1)):
            s1, q1 = modem.basis_function(f, n0 + d, m0 + e)
            lo, hi = max(s0, s1), min(s0, s1) + f.L
            if hi <= lo:
                continue
            entries[i, j] = np.vdot(q0[lo - s0:hi - s0], q1[lo - s1:hi - s1])
    return LocalizationTable(dn, dm, entries / f.energy, f.describe(), m_parity % 2)


@dataclass(frozen=True)
class Neighborhood:
    offsets: frozenset
    polarization: str = "co"

    def __iter__(self):
        return iter(sorted(self.offsets))

    def __len__(self):
        return len(self.offsets)


def full_neighborhood(dn, dm):
    return Neighborhood(frozenset((d, e) for d in range(-dn, dn + 1)
                                  for e in range(-dm, dm + 1) if (d, e) != (0, 0)))


def structure_neighborhoods(s, dn, dm):
    """Split the box around a point into same- and opposite-polarization offsets."""
    s = DpStructure.parse(s)
    co, cross = set(), set()
    for d, e in full_neighborhood(dn, dm).offsets:
        if s is DpStructure.I:
            same = e % 2 == 0
        elif s is DpStructure.II:
            same = d % 2 == 0
        else:
            same = (d + e) % 2 == 0
        (co if same else cross).add((d, e))
    return Neighborhood(frozenset(co), "co"), Neighborhood(frozenset(cross), "cross")


def intrinsic_interference(a, t, point, hood=None):
    """Sum of a[n, m] * Q_{n,m}^{n',m'} over ``hood`` around ``point``.

    For a polarized grid the symbols of the point's own polarization are used.
    """
    n0, m0 = point
    if isinstance(a, PolarizedOqamGrid):
        grid = a.aH if h_mask(a.aH.shape, a.structure)[n0, m0] else a.aV
    else:
        grid = np.asarray(a)
    N, M = grid.shape
    if not (0 <= n0 < N and 0 <= m0 < M):
        raise IndexError(f"point {point} outside grid {grid.shape}")
    if hood is None:
        hood = full_neighborhood(t.delta_n, t.delta_m)
    tt = t.for_parity(m0)
    acc = 0j
    for d, e in hood:
        n, m = n0 + d, m0 + e
        if 0 <= m < M:
            acc += grid[n % N, m] * tt.at(d, e)
    return acc


def _fmt(v, digits):
    tol = 0.5 * 10 ** -digits
    re = 0.0 if abs(v.real) < tol else v.real
    im = 0.0 if abs(v.imag) < tol else v.imag
    if re == 0 and im == 0:
        return "0"
    if im == 0:
        return f"{re:.{digits}f}".rstrip("0").rstrip(".") if abs(re - round(re)) < tol else f"{re:.{digits}f}"
    if re == 0:
        return f"{im:.{digits}f}j"
    return f"{re:.{digits}f}{im:+.{digits}f}j"


def _labels(t):
    rows = [("n=n'" if d == 0 else f"n=n'{d:+d}") for d in range(-t.delta_n, t.delta_n + 1)]
    cols = [("m=m'" if e == 0 else f"m=m'{e:+d}") for e in range(-t.delta_m, t.delta_m + 1)]
    return rows, cols


def render_table(t, fmt="csv", digits=4):
    """Deterministic text rendering (``csv`` or ``markdown``)."""
    rows, cols = _labels(t)
    cells = [[_fmt(complex(v), digits) for v in row] for row in t.entries]
    if fmt == "csv":
        out = ["(n m)," + ",".join(cols)]
        out += [r + "," + ",".join(c) for r, c in zip(rows, cells)]
    elif fmt == "markdown":
        out = ["| (n, m) | " + " | ".join(cols) + " |", "|" + "---|" * (len(cols) + 1)]
        out += ["| " + r + " | " + " | ".join(c) + " |" for r, c in zip(rows, cells)]
    else:
        raise ValueError(f"unknown table format {fmt!r}")
    return "\n".join(out) + "\n"


def table_for(kind, K, N=512, dn=2, dm=3):
    return localization_table(filters.design_filter(kind, K, N), dn, dm)
