import math

import numpy as np
import pytest

from dpfbmc import filters, modem, qam

# Acceptance outcomes collected by test_acceptance.py, reported at the end of the run.
ACCEPTANCE_RESULTS = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE_RESULTS, key=lambda k: int(k[2:])):
        ok, detail = ACCEPTANCE_RESULTS[key]
        terminalreporter.write_line(f"{key} {'PASS' if ok else 'FAIL'}: {detail}")


# -- independent oracles -------------------------------------------------------

def naive_basis(h, N, n, m, total):
    """Q_{n,m} laid out on ``total`` samples, built straight from its definition."""
    L = h.size
    c = (L - 1) / 2
    fn = n if n < N // 2 else n - N
    k = np.arange(total)
    x = np.zeros(total, dtype=complex)
    lo = m * N // 2
    idx = k[lo:lo + L]
    x[lo:lo + L] = h * np.exp(2j * np.pi * fn * (idx - c) / N) * (1j ** ((n + m) % 4))
    return x


def naive_synthesis(a, h, N):
    Nn, M = a.shape
    total = h.size + (M - 1) * N // 2
    x = np.zeros(total, dtype=complex)
    for n in range(Nn):
        for m in range(M):
            if a[n, m]:
                x += a[n, m] * naive_basis(h, N, n, m, total)
    return x


def naive_localization(h, N, n0, m0, dn, dm):
    """Entries <Q_{n0+d, m0+e}, Q_{n0, m0}> / ||h||^2 by brute-force summation."""
    total = h.size + (m0 + dm + 1) * N // 2
    ref = naive_basis(h, N, n0, m0, total)
    out = np.zeros((2 * dn + 1, 2 * dm + 1), dtype=complex)
    for i, d in enumerate(range(-dn, dn + 1)):
        for j, e in enumerate(range(-dm, dm + 1)):
            out[i, j] = np.vdot(ref, naive_basis(h, N, n0 + d, m0 + e, total))
    return out / np.dot(h, h)


def q_function(x):
    return 0.5 * math.erfc(x / math.sqrt(2))


def random_qam_grid(rng, N, Mq, order=16, mask=None):
    g = np.zeros((N, Mq), dtype=complex)
    rows = np.ones(N, bool) if mask is None else mask
    nbits = int(rows.sum()) * Mq * qam.bits_per_symbol(order)
    g[rows] = qam.modulate(rng.integers(0, 2, nbits), order).reshape(-1, Mq)
    return g


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def srrc8():
    return filters.design_filter("srrc", 8, 512)


@pytest.fixture(scope="session")
def phydyas4():
    return filters.design_filter("phydyas", 4, 512)


@pytest.fixture(scope="session")
def system():
    return modem.SystemConfig()
