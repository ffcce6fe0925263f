import math

import numpy as np
import pytest

from dpfbmc import channel, dp, modem, qam
from dpfbmc.channel import ChannelProfile, Fading, Tap
from dpfbmc.filters import design_filter

from conftest import q_function, random_qam_grid


def test_ag_los_taps():
    p = channel.builtin_profile("ag_los")
    assert [(t.tau_ns, t.power_db) for t in p.taps] == [(0, 0), (45, -12), (200, -22.3)]
    assert all(t.fading is Fading.RICEAN and t.k_rice_db == 30 for t in p.taps)


def test_vehicular_b_taps():
    p = channel.builtin_profile("vehicular_b")
    assert len(p.taps) == 6
    assert (p.taps[0].tau_ns, p.taps[0].power_db) == (0, -2.5)
    assert all(t.fading is Fading.RAYLEIGH for t in p.taps)


def test_pedestrian_a_first_tap_ricean():
    p = channel.builtin_profile("pedestrian_a")
    assert p.taps[0].fading is Fading.RICEAN and p.taps[0].k_rice_db == 10
    assert all(t.fading is Fading.RAYLEIGH for t in p.taps[1:])


def test_awgn_profile():
    p = channel.builtin_profile("awgn")
    assert len(p.taps) == 1 and p.taps[0].fading is Fading.NONE
    assert (p.taps[0].tau_ns, p.taps[0].power_db) == (0, 0)


def test_unknown_profile():
    with pytest.raises(ValueError):
        channel.builtin_profile("vehicular_a")


def test_profile_validation():
    with pytest.raises(ValueError):
        ChannelProfile("bad", (Tap(100, 0), Tap(50, -3)))
    with pytest.raises(ValueError):
        ChannelProfile("bad", (Tap(-1, 0),))
    with pytest.raises(ValueError):
        ChannelProfile("empty", ())


def test_rms_ag():
    assert channel.rms_delay_spread(channel.builtin_profile("ag_los")) == pytest.approx(18.0, abs=0.5)


def test_rms_single_tap():
    assert channel.rms_delay_spread(ChannelProfile("one", (Tap(300, -4),))) == 0


def test_rms_pedestrian_a():
    assert channel.rms_delay_spread(channel.builtin_profile("pedestrian_a")) == pytest.approx(46, abs=2)


@pytest.mark.parametrize("name", ["ag_los", "pedestrian_a", "pedestrian_b", "vehicular_b"])
def test_rms_matches_declared(name):
    p = channel.builtin_profile(name)
    assert channel.rms_delay_spread(p) == pytest.approx(p.declared_rms_ns, rel=0.05)


def test_rms_hand_computation():
    # two equal taps 100 ns apart: spread is half the separation
    p = ChannelProfile("two", (Tap(0, 0), Tap(100, 0)))
    assert channel.rms_delay_spread(p) == pytest.approx(50.0)


def test_profile_csv(tmp_path):
    path = tmp_path / "p.csv"
    path.write_text("tau_ns,power_db,fading,k_rice_db\n0,0,ricean,30\n45,-12,Ricean,30\n200,-22.3,ricean,30\n")
    p = channel.load_profile_csv(path, "ag_copy", 18)
    assert p.taps == channel.builtin_profile("ag_los").taps
    path.write_text("tau_ns,power_db,fading,k_rice_db\n0,0,rayleigh,\n")
    assert channel.load_profile_csv(path).taps[0].k_rice_db == -math.inf


@pytest.mark.parametrize("name,delays", [("ag_los", [0, 0, 2]), ("pedestrian_a", [0, 1, 2, 4]),
                                         ("pedestrian_b", [0, 2, 8, 12, 23, 37]),
                                         ("vehicular_b", [0, 3, 89, 129, 171, 200])])
def test_delay_quantization(name, delays):
    assert list(channel.quantized_delays(channel.builtin_profile(name), 10e6)) == delays


# -- realizations -------------------------------------------------------------------

def test_perfect_xpd_zero_cross():
    ch = channel.realize_channel(channel.builtin_profile("pedestrian_b"), math.inf, 10e6, 3)
    assert not ch.hHV.any() and not ch.hVH.any()
    assert ch.hHH.any() and ch.hVV.any()


def test_nan_xpd_rejected():
    with pytest.raises(ValueError):
        channel.realize_channel(channel.builtin_profile("awgn"), float("nan"), 10e6, 1)


def test_realization_deterministic():
    p = channel.builtin_profile("vehicular_b")
    a = channel.realize_channel(p, 3.0, 10e6, 42)
    b = channel.realize_channel(p, 3.0, 10e6, 42)
    assert np.array_equal(a.hHH, b.hHH) and np.array_equal(a.hVH, b.hVH)
    assert a.seed == 42


@pytest.fixture(scope="module")
def xpd3_draws():
    p = channel.builtin_profile("pedestrian_a")
    rng = np.random.default_rng(99)
    draws = [channel.realize_channel(p, 3.0, 10e6, rng) for _ in range(10_000)]
    return {k: np.array([np.sum(np.abs(getattr(c, k)) ** 2) for c in draws]) for k in ("hHH", "hVV", "hHV", "hVH")}


def test_xpd_ratio(xpd3_draws):
    ratio = xpd3_draws["hHH"].mean() / xpd3_draws["hVH"].mean()
    assert ratio == pytest.approx(10 ** 0.3, rel=0.05)


def test_symmetric_leakage(xpd3_draws):
    r1 = xpd3_draws["hHH"].mean() / xpd3_draws["hVH"].mean()
    r2 = xpd3_draws["hVV"].mean() / xpd3_draws["hHV"].mean()
    assert r1 == pytest.approx(r2, rel=0.05)


def test_unit_mean_power(xpd3_draws):
    assert xpd3_draws["hHH"].mean() == pytest.approx(1.0, rel=0.01)
    assert xpd3_draws["hVV"].mean() == pytest.approx(1.0, rel=0.01)


def test_ricean_scatter_power():
    p = ChannelProfile("los", (Tap(0, 0, Fading.RICEAN, 30),))
    rng = np.random.default_rng(5)
    h = np.array([channel.realize_channel(p, math.inf, 10e6, rng).hHH[0] for _ in range(10_000)])
    P = np.mean(np.abs(h) ** 2)
    excess = np.mean(np.abs(h) ** 4) - P ** 2          # 2 A s2 + s2^2 for LOS power A, scatter s2
    scatter = P - math.sqrt(P ** 2 - excess)
    assert P == pytest.approx(1.0, rel=0.01)
    assert scatter == pytest.approx(1 / 1001, rel=0.1)


# -- application ------------------------------------------------------------------

def _pw(rng, n=256):
    w = modem.Waveform(rng.standard_normal(n) + 1j * rng.standard_normal(n), 10e6, 64, 4)
    v = w.with_samples(rng.standard_normal(n) + 1j * rng.standard_normal(n))
    return dp.PolarizedWaveform(w, v)


def test_identity_channel(rng):
    pw = _pw(rng)
    one = np.array([1.0 + 0j])
    ch = channel.DualPolChannelRealization(one, one, np.zeros(1, complex), np.zeros(1, complex), math.inf)
    out = channel.apply_dual_pol_channel(pw, ch)
    assert np.array_equal(out.h.samples, pw.h.samples) and np.array_equal(out.v.samples, pw.v.samples)


def test_cross_term_isolation(rng):
    pw = _pw(rng)
    z = np.zeros(3, complex)
    hvh = np.array([0.1, 0.2j, -0.05])
    out = channel.apply_dual_pol_channel(pw, channel.DualPolChannelRealization(z, z, z, hvh, 3.0))
    np.testing.assert_allclose(out.h.samples, np.convolve(pw.v.samples, hvh)[:len(pw.h)], atol=1e-15)
    assert not out.v.samples.any()


def test_dual_pol_superposition(rng):
    pw = _pw(rng)
    ch = channel.realize_channel(channel.builtin_profile("pedestrian_b"), 5.0, 10e6, rng)
    zero = np.zeros(len(pw.h), complex)
    joint = channel.apply_dual_pol_channel(pw, ch)
    a = channel.apply_dual_pol_channel(pw.with_samples(pw.h.samples, zero), ch)
    b = channel.apply_dual_pol_channel(pw.with_samples(zero, pw.v.samples), ch)
    assert np.max(np.abs(a.h.samples + b.h.samples - joint.h.samples)) <= 1e-12
    assert np.max(np.abs(a.v.samples + b.v.samples - joint.v.samples)) <= 1e-12


def test_angular_mismatch_identity(rng):
    pw = _pw(rng)
    out = channel.apply_angular_mismatch(pw, 0.0)
    assert np.array_equal(out.h.samples, pw.h.samples)


def test_angular_mismatch_rotation(rng):
    pw = _pw(rng)
    out = channel.apply_angular_mismatch(pw, 30.0)
    c, s = math.cos(math.pi / 6), 0.5
    np.testing.assert_allclose(out.h.samples, c * pw.h.samples + s * pw.v.samples)
    np.testing.assert_allclose(out.v.samples, c * pw.v.samples + s * pw.h.samples)


@pytest.mark.parametrize("theta", [-1.0, 90.0, 120.0])
def test_angular_mismatch_domain(theta, rng):
    with pytest.raises(ValueError):
        channel.apply_angular_mismatch(_pw(rng), theta)


# -- noise --------------------------------------------------------------------------

def test_awgn_infinite_snr(rng):
    w = _pw(rng).h
    assert channel.apply_awgn(w, math.inf, 100, rng) is w


def test_awgn_zero_power(rng):
    w = modem.Waveform(np.zeros(64, complex), 1.0, 64, 1)
    with pytest.raises(ValueError):
        channel.apply_awgn(w, 10.0, 100, rng)


def test_noise_variance_calibration():
    rng = np.random.default_rng(8)
    n = 1_000_000
    w = modem.Waveform(np.zeros(n, complex), 1.0, 64, 1)
    target = channel.noise_variance(2.0 * n, n, 3.0)
    out = channel.apply_awgn(w, 3.0, n, rng, energy=2.0 * n)
    assert np.var(out.samples) == pytest.approx(target, rel=0.02)
    assert target == pytest.approx(2.0 / 10 ** 0.3)


def test_qpsk_ber_at_4db():
    """CP-free OFDM symbol stream, QPSK, 4 dB."""
    rng = np.random.default_rng(21)
    sc = modem.SystemConfig(N=64, guard_left=0, guard_right=0, dc_null=False, cp_fraction=0)
    g = random_qam_grid(rng, 64, 2000, order=4)
    bits = qam.demodulate(g.T.reshape(-1), 4)
    w = modem.cp_ofdm_modulate(g, sc)
    rx = channel.apply_awgn(w, 4.0, bits.size, rng)
    r = modem.cp_ofdm_demodulate(rx, sc)
    errors = np.count_nonzero(qam.demodulate(r.T.reshape(-1), 4) != bits)
    p = q_function(math.sqrt(2 * 10 ** 0.4))
    sigma = math.sqrt(p * (1 - p) / bits.size)
    assert p == pytest.approx(1.25e-2, rel=0.01)
    assert abs(errors / bits.size - p) <= 3 * sigma


# -- offsets ------------------------------------------------------------------------

def test_cfo_zero_identity(rng):
    w = _pw(rng).h
    assert channel.apply_cfo(w, 0.0, 64) is w


def test_cfo_rotation(rng):
    w = _pw(rng).h
    out = channel.apply_cfo(w, 0.25, 64)
    k = np.arange(len(w))
    np.testing.assert_allclose(out.samples, w.samples * np.exp(2j * np.pi * 0.25 * k / 64))


@pytest.mark.parametrize("cfo", [0.5, -0.5, 0.7])
def test_cfo_domain(cfo, rng):
    with pytest.raises(ValueError):
        channel.apply_cfo(_pw(rng).h, cfo, 64)


def test_cto_shift(rng):
    w = _pw(rng).h
    late = channel.apply_cto(w, 5).samples
    np.testing.assert_array_equal(late[:-5], w.samples[5:])
    assert not late[-5:].any()
    early = channel.apply_cto(w, -3).samples
    np.testing.assert_array_equal(early[3:], w.samples[:-3])


def test_cto_out_of_frame(rng):
    w = _pw(rng).h
    with pytest.raises(ValueError):
        channel.apply_cto(w, len(w))


def test_cto_half_symbol_slip_breaks_detection():
    rng = np.random.default_rng(4)
    N = 64
    f = design_filter("phydyas", 4, N)
    g = random_qam_grid(rng, N, 16, order=4)
    a = modem.qam_to_oqam(g)
    w = modem.fbmc_modulate_fast(a, f)
    r = modem.fbmc_demodulate(channel.apply_cto(w, N // 2), f)
    bits = qam.demodulate(g.reshape(-1), 4)
    got = qam.demodulate(modem.oqam_to_qam(r.real).reshape(-1), 4)
    assert np.mean(got != bits) == pytest.approx(0.5, abs=0.05)


def test_frequency_response_matches_dft():
    h = np.array([1.0, 0.5j, 0, 0.25])
    H = channel.frequency_response(h, 16)
    k = np.arange(16)
    ref = sum(h[i] * np.exp(-2j * np.pi * k * i / 16) for i in range(4))
    np.testing.assert_allclose(H, ref, atol=1e-14)
    long = np.zeros(20, complex)
    long[18] = 1
    np.testing.assert_allclose(channel.frequency_response(long, 16), np.exp(-2j * np.pi * k * 18 / 16), atol=1e-14)
