import numpy as np
import pytest

from fbmcest.channel import (ChannelRealization, PowerDelayProfile, apply, cfr_of_taps, convolve,
                             get_profile, load_profiles, noise_variance, realize, unit_noise)
from fbmcest.errors import ParameterError
from fbmcest.fbcore import analyze, atom, design_prototype, random_qpsk_frame, synthesize
from fbmcest.interference import closed_form_weights, exact_pseudo_pilots
from fbmcest.preamble import PreambleSpec, generate

FLAT = PowerDelayProfile("flat", np.array([0]), np.array([1.0]))


def test_bundled_profiles():
    a, b = get_profile("veh-a"), get_profile("veh-b")
    np.testing.assert_array_equal(a.delays, [0, 3, 7, 11, 17, 25])
    assert a.L_h == 26 and b.L_h == 201
    for p in (a, b):
        assert p.powers.sum() == pytest.approx(1.0, abs=1e-12)
    # 0 dB and -1 dB leading taps of Veh-A
    assert a.powers[1] / a.powers[0] == pytest.approx(10 ** -0.1)


def test_sample_rate_changes_delays():
    a = get_profile("veh-a", sample_rate_hz=20e6)
    assert a.delays[-1] == 50


def test_custom_profile_file(tmp_path):
    path = tmp_path / "pdp.toml"
    path.write_text('[[profile]]\nname = "two"\nsample_rate_hz = 1e6\n'
                    'taps = [[0.0, 0.0], [2000.0, -3.0]]\n')
    p = load_profiles(path)["two"]
    np.testing.assert_array_equal(p.delays, [0, 2])
    with pytest.raises(ParameterError):
        get_profile("nope", path=path)


def test_profile_invariants():
    with pytest.raises(ParameterError):
        PowerDelayProfile("x", np.array([0, 2, 1]), np.array([0.5, 0.25, 0.25]))
    with pytest.raises(ParameterError):
        PowerDelayProfile("x", np.array([1, 2]), np.array([0.5, 0.5]))
    with pytest.raises(ParameterError):
        PowerDelayProfile("x", np.array([0, 2]), np.array([0.5, 0.6]))


def test_invalid_correlation():
    with pytest.raises(ParameterError):
        realize(FLAT, 2, 2, 1.0, 0.0, 0)
    with pytest.raises(ParameterError):
        realize(FLAT, 2, 2, 0.0, -0.1, 0)


def test_uncorrelated_antennas():
    h = np.array([realize(FLAT, 2, 2, 0.0, 0.0, s).taps[:, :, 0] for s in range(10_000)])
    corr = np.mean(h[:, 0, 0] * np.conj(h[:, 0, 1]))
    assert abs(corr) < 3 / np.sqrt(10_000) * np.sqrt(2)


def test_kronecker_correlation():
    r = np.random.default_rng(0)
    h = np.array([realize(FLAT, 2, 2, 0.5, 0.3, r).taps[:, :, 0] for _ in range(20_000)])
    assert np.mean(h[:, 0, 0] * np.conj(h[:, 0, 1])).real == pytest.approx(0.5, abs=0.04)
    assert np.mean(h[:, 0, 0] * np.conj(h[:, 1, 0])).real == pytest.approx(0.3, abs=0.04)
    assert np.mean(np.sum(np.abs(h) ** 2, axis=(1, 2))) == pytest.approx(4.0, rel=0.03)


def test_single_tap_gives_flat_cfr():
    H = realize(FLAT, 1, 1, rng=3).cfr(64)
    assert H.shape == (64, 1, 1)
    assert np.ptp(np.abs(H)) < 1e-14 and np.ptp(np.angle(H)) < 1e-14


def test_veh_a_tap_powers():
    pdp = get_profile("veh-a")
    r = np.random.default_rng(1)
    taps = np.array([realize(pdp, rng=r).taps[0, 0] for _ in range(10_000)])
    var = np.mean(np.abs(taps[:, pdp.delays]) ** 2, axis=0)
    np.testing.assert_allclose(var, pdp.powers, rtol=0.05)


def test_cfr_consistent_with_taps():
    ch = realize(get_profile("veh-a"), 2, 2, 0.2, 0.2, 5)
    H = ch.cfr(64)
    p = np.arange(64)
    direct = np.einsum("jil,pl->pji", ch.taps,
                       np.exp(-2j * np.pi * np.outer(p, np.arange(ch.length)) / 64))
    np.testing.assert_allclose(H, direct, atol=1e-10)
    with pytest.raises(ParameterError):
        cfr_of_taps(np.ones(65), 64)


def test_identity_channel_without_noise(rng):
    s = rng.standard_normal(100) + 1j * rng.standard_normal(100)
    ch = ChannelRealization(np.ones((1, 1, 1), dtype=complex))
    np.testing.assert_array_equal(apply(s, ch, np.inf, rng)[0], s)


def test_flat_channel_scales_afb_output(filt64, rng):
    fr = random_qpsk_frame(64, 6, rng)
    s = synthesize(fr, filt64)
    h0 = 0.3 - 0.8j
    ch = ChannelRealization(np.full((1, 1, 1), h0))
    np.testing.assert_allclose(analyze(apply(s, ch, np.inf)[0], filt64, 6),
                               h0 * analyze(s, filt64, 6), atol=1e-12)


def test_apply_is_linear(rng):
    ch = realize(get_profile("veh-a"), 2, 1, rng=rng)
    a = rng.standard_normal((2, 300)) + 0j
    b = rng.standard_normal((2, 300)) + 0j
    np.testing.assert_allclose(convolve(a + 2 * b, ch), convolve(a, ch) + 2 * convolve(b, ch),
                               atol=1e-12)


def test_long_channel_uses_fft_path(rng):
    ch = realize(get_profile("veh-b"), rng=rng)
    s = rng.standard_normal(1000) + 0j
    np.testing.assert_allclose(convolve(s, ch)[0], np.convolve(s, ch.taps[0, 0]), atol=1e-12)


def test_zero_power_signal_rejected():
    with pytest.raises(ParameterError):
        apply(np.zeros(10), ChannelRealization(np.ones((1, 1, 1))), 10.0)
    assert noise_variance(np.inf, 1.0) == 0.0
    assert noise_variance(10.0, 2.0) == pytest.approx(0.2)


def test_noise_after_afb_has_variance_sigma2(filt64):
    # 10^4 independent noise segments, each correlated with one atom
    r = np.random.default_rng(9)
    g = atom(filt64, 17, 0)
    sigma2 = 0.37
    w = np.sqrt(sigma2) * unit_noise(10_000, g.size, r)
    y = w @ np.conj(g)
    assert np.mean(np.abs(y) ** 2) == pytest.approx(sigma2, rel=0.05)


def test_noise_is_measured_against_signal_power(rng):
    s = 2.0 * np.ones(20_000, dtype=complex)
    ch = ChannelRealization(np.ones((1, 1, 1), dtype=complex))
    r = apply(s, ch, 10.0, rng)[0]
    assert np.var(r - s) == pytest.approx(0.4, rel=0.05)


def test_model_error_grows_with_delay_spread(filt512):
    t = closed_form_weights(filt512)
    fr = generate(PreambleSpec("iam-c", 512))[0]
    c = exact_pseudo_pilots(fr, filt512, [1])[:, 0]
    s = synthesize(fr, filt512)[None]
    errs = []
    for name in ("flat", "veh-a", "veh-b"):
        pdp = get_profile(name)
        e = []
        for seed in range(10):
            ch = realize(pdp, rng=seed)
            y = analyze(convolve(s, ch)[0], filt512, 3, [1])[:, 0]
            H = ch.cfr(512)[:, 0, 0]
            e.append(np.sum(np.abs(y - H * c) ** 2) / np.sum(np.abs(H * c) ** 2))
        errs.append(np.mean(e))
    assert errs[0] < 1e-20 < errs[1] < errs[2]
    assert t.beta > 0
