from fractions import Fraction

import numpy as np
import pytest

from dpfbmc import channel, estimation, metrics, modem, qam
from dpfbmc.filters import design_filter
from dpfbmc.interference import full_neighborhood, intrinsic_interference, localization_table
from dpfbmc.modem import ConfigError, SystemConfig

from conftest import naive_basis, naive_synthesis, random_qam_grid

FILTERS = [("phydyas", 4), ("iota", 4), ("srrc", 4), ("srrc", 8)]


def _random_oqam(rng, N, M):
    return rng.choice([-3.0, -1.0, 1.0, 3.0], size=(N, M)) / np.sqrt(10)


# -- staggering -------------------------------------------------------------

def test_oqam_zero_grid():
    assert not modem.qam_to_oqam(np.zeros((8, 4), complex)).any()


def test_oqam_single_symbol_layout():
    g = np.zeros((4, 2), complex)
    g[0, 0] = 1 + 1j
    a = modem.qam_to_oqam(g)
    assert a.shape == (4, 4)
    assert a[0, 0] == 1 and a[0, 1] == 1
    assert np.count_nonzero(a) == 2


def test_oqam_round_trip(rng):
    g = random_qam_grid(rng, 64, 16)
    assert np.array_equal(modem.oqam_to_qam(modem.qam_to_oqam(g)), g)


def test_oqam_inverse_direction(rng):
    a = _random_oqam(rng, 16, 10)
    assert np.array_equal(modem.qam_to_oqam(modem.oqam_to_qam(a)), a)


def test_oqam_odd_m_rejected():
    with pytest.raises(ValueError):
        modem.oqam_to_qam(np.zeros((4, 5)))


# -- basis ------------------------------------------------------------------

@pytest.mark.parametrize("n,m,expected", [(0, 0, 1), (1, 0, 1j), (1, 1, -1), (3, 2, 1j), (2, 2, 1)])
def test_phase_term(n, m, expected):
    assert modem.phase_term(n, m) == expected
    assert abs(modem.phase_term(n, m) - np.exp(1j * np.pi * (n + m) / 2)) < 1e-15


def test_basis_origin_is_prototype():
    f = design_filter("phydyas", 4, 64)
    start, q = modem.basis_function(f, 0, 0)
    assert start == 0
    np.testing.assert_array_equal(q, f.coeffs)


def test_basis_one_symbol_delay():
    f = design_filter("srrc", 4, 64)
    start, q = modem.basis_function(f, 0, 2)
    assert start == 64
    np.testing.assert_array_equal(q, -f.coeffs)


def test_basis_self_inner_product():
    f = design_filter("iota", 4, 64)
    _, q = modem.basis_function(f, 0, 0)
    assert abs(np.vdot(q, q) - 1) < 1e-12


def test_basis_matches_definition():
    f = design_filter("srrc", 4, 32)
    for n, m in [(3, 1), (17, 4), (31, 0)]:
        start, q = modem.basis_function(f, n, m)
        ref = naive_basis(f.coeffs, 32, n, m, f.L + m * 16)
        np.testing.assert_allclose(q, ref[start:start + f.L], atol=1e-13)


# -- modulators ---------------------------------------------------------------

def test_waveform_length():
    f = design_filter("srrc", 8, 64)
    w = modem.fbmc_modulate_fast(np.zeros((64, 10)), f)
    assert len(w) == 8 * 64 + 9 * 32 == modem.frame_length(10, f)


@pytest.mark.parametrize("mod", [modem.fbmc_modulate_direct, modem.fbmc_modulate_fast])
def test_zero_grid_zero_waveform(mod):
    f = design_filter("phydyas", 4, 32)
    assert not mod(np.zeros((32, 6)), f).samples.any()


def test_direct_single_symbol_is_basis():
    f = design_filter("phydyas", 4, 32)
    a = np.zeros((32, 4))
    a[0, 0] = 1
    x = modem.fbmc_modulate_direct(a, f).samples
    np.testing.assert_allclose(x[:f.L], f.coeffs, atol=1e-15)
    assert not x[f.L:].any()


def test_direct_matches_naive_oracle(rng):
    f = design_filter("srrc", 4, 32)
    a = _random_oqam(rng, 32, 8)
    np.testing.assert_allclose(modem.fbmc_modulate_direct(a, f).samples, naive_synthesis(a, f.coeffs, 32),
                               atol=1e-12)


def test_direct_vs_fast_small(rng):
    f = design_filter("srrc", 4, 32)
    a = _random_oqam(rng, 32, 8)
    d = modem.fbmc_modulate_direct(a, f).samples - modem.fbmc_modulate_fast(a, f).samples
    assert np.max(np.abs(d)) <= 1e-10


@pytest.mark.parametrize("kind,K", FILTERS)
def test_fast_impulse_matches_direct(kind, K):
    f = design_filter(kind, K, 64)
    a = np.zeros((64, 6))
    a[37, 3] = 1.0
    d = modem.fbmc_modulate_direct(a, f).samples - modem.fbmc_modulate_fast(a, f).samples
    assert np.max(np.abs(d)) <= 1e-12


def test_fast_full_grid_matches_direct(rng):
    f = design_filter("phydyas", 4, 512)
    a = _random_oqam(rng, 512, 32)
    d = modem.fbmc_modulate_direct(a, f).samples - modem.fbmc_modulate_fast(a, f).samples
    assert np.max(np.abs(d)) <= 1e-10


@pytest.mark.parametrize("N", [32, 64])
@pytest.mark.parametrize("kind,K", FILTERS)
def test_direct_fast_equivalence_all_filters(kind, K, N, rng):
    f = design_filter(kind, K, N)
    a = _random_oqam(rng, N, 12)
    d = modem.fbmc_modulate_direct(a, f).samples - modem.fbmc_modulate_fast(a, f).samples
    assert np.max(np.abs(d)) <= 1e-10


def test_shape_mismatch():
    f = design_filter("srrc", 4, 32)
    with pytest.raises(ValueError):
        modem.fbmc_modulate_fast(np.zeros((16, 4)), f)
    with pytest.raises(ValueError):
        modem.fbmc_modulate_direct(np.zeros((16, 4)), f)


def test_linearity(rng):
    f = design_filter("iota", 4, 64)
    a, b = _random_oqam(rng, 64, 8), _random_oqam(rng, 64, 8)
    lhs = modem.fbmc_modulate_fast(2.5 * a - 0.75 * b, f).samples
    rhs = 2.5 * modem.fbmc_modulate_fast(a, f).samples - 0.75 * modem.fbmc_modulate_fast(b, f).samples
    assert np.max(np.abs(lhs - rhs)) <= 1e-10


@pytest.mark.parametrize("kind,K", FILTERS)
def test_parseval(kind, K, rng):
    f = design_filter(kind, K, 128)
    a = _random_oqam(rng, 128, 16)
    e = modem.fbmc_modulate_fast(a, f).energy
    assert e == pytest.approx(np.sum(a ** 2), rel=0.01)


# -- demodulator --------------------------------------------------------------

def test_demod_zero():
    f = design_filter("srrc", 4, 32)
    w = modem.fbmc_modulate_fast(np.zeros((32, 6)), f)
    assert not modem.fbmc_demodulate(w, f).any()


def test_demod_real_part_loopback_exact(rng):
    f = design_filter("phydyas", 4, 512)
    sc = SystemConfig()
    a = modem.qam_to_oqam(random_qam_grid(rng, 512, 16, mask=sc.active_mask))
    r = modem.fbmc_demodulate(modem.fbmc_modulate_fast(a, f), f)
    mask = np.repeat(sc.active_mask[:, None], 32, axis=1)
    assert np.max(np.abs(r.real[mask] - a[mask])) <= 1e-9


@pytest.mark.parametrize("kind,K", FILTERS)
def test_demod_imag_equals_neighbourhood_sum(kind, K, rng):
    N, M = 64, 16
    f = design_filter(kind, K, N)
    t = localization_table(f, 2, 3)
    n0, m0 = 20, 7
    a = np.zeros((N, M))
    for d, e in full_neighborhood(2, 3):
        a[n0 + d, m0 + e] = rng.choice([-1.0, 1.0])
    r = modem.fbmc_demodulate(modem.fbmc_modulate_fast(a, f), f)
    pred = intrinsic_interference(a, t, (n0, m0))
    assert abs(r[n0, m0].imag - pred.imag) <= 1e-6
    assert abs(r[n0, m0] - pred) <= 1e-6


def test_demod_length_mismatch():
    f = design_filter("srrc", 4, 32)
    with pytest.raises(ValueError):
        modem.fbmc_demodulate(np.zeros(f.L + 5, complex), f)
    w = modem.fbmc_modulate_fast(np.zeros((32, 4)), f)
    with pytest.raises(ValueError):
        modem.fbmc_demodulate(w.with_samples(w.samples[:-1]), f)


def test_demod_bare_array_infers_symbols(rng):
    f = design_filter("srrc", 4, 32)
    a = _random_oqam(rng, 32, 6)
    w = modem.fbmc_modulate_fast(a, f)
    np.testing.assert_allclose(modem.fbmc_demodulate(w.samples, f), modem.fbmc_demodulate(w, f))


@pytest.mark.parametrize("kind,K", [("phydyas", 4), ("iota", 4)])
def test_real_orthogonality_neighbourhood(kind, K):
    t = localization_table(design_filter(kind, K, 512), 2, 3)
    e = t.entries.copy()
    e[2, 3] -= 1
    assert np.max(np.abs(e.real)) < 1e-3


@pytest.mark.parametrize("K", [4, 8])
def test_real_orthogonality_srrc(K):
    t = localization_table(design_filter("srrc", K, 512), 2, 3)
    e = t.entries.copy()
    e[2, 3] -= 1
    assert np.max(np.abs(e.real)) < 5e-3


@pytest.mark.parametrize("kind,K", [("phydyas", 4), ("iota", 4)])
def test_ideal_channel_recovery(kind, K, rng):
    f = design_filter(kind, K, 64)
    a = _random_oqam(rng, 64, 16)
    r = modem.fbmc_demodulate(modem.fbmc_modulate_fast(a, f), f)
    assert np.max(np.abs(r.real - a)) < 1e-6


# -- CP-OFDM / WOLA -------------------------------------------------------------

def test_ofdm_round_trip(rng, system):
    g = random_qam_grid(rng, 512, 8, mask=system.active_mask)
    out = modem.cp_ofdm_demodulate(modem.cp_ofdm_modulate(g, system), system)
    assert np.max(np.abs(out - g)) <= 1e-10


def test_ofdm_waveform_layout(system):
    w = modem.cp_ofdm_modulate(np.ones((512, 3)), system)
    assert len(w) == 3 * (512 + 16)
    np.testing.assert_allclose(w.samples[:16], w.samples[512:528])


def test_ofdm_linear_gain(rng, system):
    g = random_qam_grid(rng, 512, 4, mask=system.active_mask)
    w = modem.cp_ofdm_modulate(g, system)
    out = modem.cp_ofdm_demodulate(w.with_samples(2 * w.samples), system)
    np.testing.assert_allclose(out, 2 * g, atol=1e-10)


def test_ofdm_two_tap_channel_zf(rng, system):
    g = random_qam_grid(rng, 512, 8, order=16, mask=system.active_mask)
    h = np.zeros(9, complex)
    h[0], h[8] = 0.8, 0.6j
    w = modem.cp_ofdm_modulate(g, system)
    rx = channel.apply_channel(w, h)
    r = modem.cp_ofdm_demodulate(rx, system)
    eq, erased = estimation.zf_equalize(r, estimation.perfect_channel_estimate(h, 512, 8))
    sel = system.active_mask
    assert not erased[sel].any()
    tx = qam.demodulate(g[sel], 16)
    assert np.array_equal(qam.demodulate(eq[sel], 16), tx)


def test_ofdm_non_integer_cp():
    sc = SystemConfig(N=64, cp_fraction=Fraction(1, 128))
    with pytest.raises(ConfigError):
        modem.cp_ofdm_modulate(np.zeros((64, 2)), sc)


def test_system_config_guard_overflow():
    with pytest.raises(ConfigError):
        SystemConfig(N=32, guard_left=20, guard_right=12)


def test_active_mask_counts(system):
    m = system.active_mask
    assert m.sum() == 512 - 33 - 1
    assert not m[0]
    fn = modem.signed_frequencies(512)
    assert fn[m].min() == -256 + 17 and fn[m].max() == 255 - 16


def test_wola_zero_rolloff_identity(rng, system):
    w = modem.cp_ofdm_modulate(random_qam_grid(rng, 512, 4, mask=system.active_mask), system)
    assert modem.wola_window(w, system) is w


def _wola_cfg(rolloff=0.05):
    return SystemConfig(cp_fraction=Fraction(1, 16), window_rolloff=rolloff)


def test_wola_energy_preserved(rng):
    sc = _wola_cfg()
    w = modem.cp_ofdm_modulate(random_qam_grid(rng, 512, 64, mask=sc.active_mask), sc)
    ww = modem.wola_window(w, sc)
    assert ww.energy == pytest.approx(w.energy, rel=0.01)


def test_wola_lowers_out_of_band(rng):
    sc = _wola_cfg()
    g = random_qam_grid(rng, 512, 200, order=4, mask=sc.active_mask)
    w = modem.cp_ofdm_modulate(g, sc)
    ww = modem.wola_window(w, sc)
    oob_plain = metrics.oob_power(metrics.psd_periodogram(w, 512), 239.5, 2)
    oob_wola = metrics.oob_power(metrics.psd_periodogram(ww, 512), 239.5, 2)
    assert oob_wola < oob_plain


def test_wola_noiseless_round_trip(rng):
    sc = _wola_cfg()
    g = random_qam_grid(rng, 512, 8, order=16, mask=sc.active_mask)
    ww = modem.wola_window(modem.cp_ofdm_modulate(g, sc), sc)
    r = modem.cp_ofdm_demodulate(ww, sc) / ww.gain
    sel = sc.active_mask
    assert np.array_equal(qam.demodulate(r[sel], 16), qam.demodulate(g[sel], 16))
    assert np.max(np.abs(r - g)) < 1e-10


def test_wola_extension_exceeds_cp(rng):
    sc = SystemConfig(cp_fraction=Fraction(1, 32), window_rolloff=0.05)
    w = modem.cp_ofdm_modulate(np.zeros((512, 2)), sc)
    with pytest.raises(ConfigError):
        modem.wola_window(w, sc)


# -- truncation -------------------------------------------------------------

def test_truncate_k2_identity():
    f = design_filter("phydyas", 2, 64)
    w = modem.fbmc_modulate_fast(np.ones((64, 4)), f)
    assert modem.truncate_tails(w, 2, 64) is w


def test_truncate_k8_cut():
    f = design_filter("srrc", 8, 512)
    w = modem.fbmc_modulate_fast(np.zeros((512, 32)), f)
    t = modem.truncate_tails(w, 8, 512)
    assert len(w) - len(t) == 2 * 1536
    assert t.head_cut == t.tail_cut == 1536


def test_truncate_too_short():
    f = design_filter("srrc", 8, 16)
    w = modem.fbmc_modulate_fast(np.zeros((16, 2)), f).with_samples(np.zeros(60, complex))
    with pytest.raises(ValueError):
        modem.truncate_tails(w, 8, 16)


def test_truncated_interior_symbols_unchanged(rng):
    N, M, K = 64, 32, 8
    f = design_filter("srrc", K, N)
    a = _random_oqam(rng, N, M)
    w = modem.fbmc_modulate_fast(a, f)
    full = modem.fbmc_demodulate(w, f)
    cut = modem.fbmc_demodulate(modem.truncate_tails(w, K, N), f)
    inner = slice(K - 2, M - (K - 2) - 1)
    assert np.max(np.abs(full[:, inner] - cut[:, inner])) <= 1e-9


# -- I/O ----------------------------------------------------------------------

def test_waveform_io_round_trip(tmp_path, rng):
    f = design_filter("srrc", 4, 32)
    w = modem.truncate_tails(modem.fbmc_modulate_fast(_random_oqam(rng, 32, 6), f, 5e6), 4, 32)
    p = tmp_path / "x.iq"
    modem.write_waveform(w, p)
    assert p.stat().st_size == 16 * len(w)
    back = modem.read_waveform(p)
    assert np.array_equal(back.samples, w.samples)
    assert (back.sample_rate, back.N, back.K, back.head_cut, back.n_symbols) == (5e6, 32, 4, 32, 6)
    np.testing.assert_allclose(modem.fbmc_demodulate(back, f), modem.fbmc_demodulate(w, f))


def test_export_grid_csv(tmp_path):
    g = np.zeros((4, 3), complex)
    g[1, 2] = 0.5 - 2j
    p = tmp_path / "g.csv"
    modem.export_grid_csv(g, p)
    assert p.read_text().splitlines() == ["n,m,re,im", "1,2,0.5,-2"]
