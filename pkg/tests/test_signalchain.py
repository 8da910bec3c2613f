import numpy as np
import pytest

from encbist import mls, sensor, signalchain as sc, testengine as te

FS = sensor.INTERNAL_RATE


@pytest.fixture(scope="module")
def code63():
    return mls.make_code(6, 100.0)


@pytest.fixture(scope="module")
def healthy(code63):
    return sc.run_chain(sc.Scenario(code63))


def band_fraction(x, fs, lo, hi):
    p = np.abs(np.fft.rfft(x)) ** 2
    f = np.fft.rfftfreq(x.size, 1 / fs)
    return p[(f >= lo) & (f <= hi)].sum() / p.sum()


def test_shape_code_dc_gain():
    y = sc.shape_code(np.ones(6400), 300.0, FS)
    assert y[-1] == pytest.approx(1.0, abs=1e-6)


def test_shape_code_power_below_cutoff(code63):
    w = mls.code_waveform(code63, FS, periods=2)
    y = sc.shape_code(w, 300.0, FS)
    assert band_fraction(y[w.size // 2:], FS, 0, 300.0) >= 0.90


def test_shape_code_wide_cutoff_is_near_identity(code63):
    w = mls.code_waveform(code63, FS)
    y = sc.shape_code(w, FS / 2.5, FS)
    spc = int(mls.samples_per_chip(code63, FS))
    centres = np.arange(code63.n_bits) * spc + spc // 2
    assert np.max(np.abs(y[centres] - w[centres])) < 0.02


def test_shape_code_invalid_cutoff():
    with pytest.raises(ValueError):
        sc.shape_code(np.ones(10), FS / 2, FS)


def test_modulate_constant_and_zero():
    n = 6400
    t = np.arange(n) / FS
    s = sc.modulate(np.ones(n), 1000.0, "sine", FS)
    assert np.allclose(s, 0.05 * np.cos(2 * np.pi * 1000 * t))
    assert np.all(sc.modulate(np.zeros(n), 1000.0, "sine", FS) == 0)
    with pytest.raises(ValueError):
        sc.modulate(np.ones(4), FS, "sine", FS)


def test_modulated_code_band_power(code63):
    w = mls.code_waveform(code63, FS)
    s = sc.modulate(w, 1000.0, "sine", FS)
    assert band_fraction(s, FS, 900.0, 1100.0) >= 0.90


def test_square_carrier_values():
    t = np.arange(64) / FS
    sq = sc.carrier(t, 1000.0, "square")
    assert set(np.unique(sq)) == {-1.0, 1.0}
    assert np.all(np.sign(np.cos(2 * np.pi * 1000 * t[np.abs(np.cos(2 * np.pi * 1000 * t)) > 1e-9]))
                  == sq[np.abs(np.cos(2 * np.pi * 1000 * t)) > 1e-9])


def test_operational_filter_gains():
    cfg = sc.ChainConfig()
    assert cfg.operational_attenuation_db() >= 40.0
    g10 = abs(cfg.operational_filter.gain(10.0, FS)[0])
    assert -20 * np.log10(g10) <= 1.0
    g0 = abs(cfg.operational_filter.gain(0.0, FS)[0])
    assert abs(20 * np.log10(g0)) <= 0.1
    # time domain: a 1 kHz tone through the path
    t = np.arange(12800) / FS
    y = sc.operational_path(np.cos(2 * np.pi * 1000 * t), cfg)
    assert np.max(np.abs(y[6400:])) <= 10 ** (-40 / 20)


def test_alias_guard():
    cfg = sc.ChainConfig()
    f = np.linspace(400.0, 5000.0, 200)
    att = -20 * np.log10(np.abs(cfg.demod_lowpass.gain(f, FS)))
    assert att.min() >= 40.0


def test_healthy_demod_correlates_with_code(healthy):
    d, c = healthy.sequence(0)
    assert te.correlation(d, c) >= 0.99
    # amplitude: sensitivity at the carrier times stimulus amplitude
    m = sensor.default_model()
    cfg = sc.ChainConfig()
    gain = abs(sensor.output_per_g(m, 1000.0) * cfg.test_filter.gain(1000.0, FS)[0]) * 0.05
    assert np.sqrt(np.mean(d**2)) == pytest.approx(gain * np.sqrt(np.mean(c**2)), rel=0.02)


def test_quadrature_phase_error_nulls_output(code63, healthy):
    cfg = sc.ChainConfig(demod_phase_error=np.pi / 2)
    out = sc.run_chain(sc.Scenario(code63, cfg), delay=sc.chain_delay(sc.Scenario(code63)))
    d, c = out.sequence(0)
    d0, _ = healthy.sequence(0)
    assert abs(te.covariance(d, c)) < 1e-3 * te.covariance(d0, c)
    # only sideband dispersion survives in quadrature
    assert np.sqrt(np.mean(d**2)) < 0.05 * np.sqrt(np.mean(d0**2))


def test_phase_error_scales_by_cosine(code63, healthy):
    phi = 0.6
    cfg = sc.ChainConfig(demod_phase_error=phi)
    d, c = sc.run_chain(sc.Scenario(code63, cfg), delay=sc.chain_delay(sc.Scenario(code63))).sequence(0)
    d0, _ = healthy.sequence(0)
    assert te.covariance(d, c) / te.covariance(d0, c) == pytest.approx(np.cos(phi), rel=1e-3)


def test_end_to_end_linearity(code63):
    a = sc.Scenario(code63)
    b = sc.Scenario(code63, stimulus=False, measurand=(sc.Sine(0.2, 10.0),),
                    perturbation=(sc.Sine(0.03, 1007.0, 0.4),))
    both = a.replace(measurand=b.measurand, perturbation=b.perturbation)
    delay = sc.chain_delay(a)
    oa, ob, oab = (sc.run_chain(s, delay) for s in (a, b, both))
    for field in ("v_out", "v_demod"):
        lhs = getattr(oab, field)
        rhs = getattr(oa, field) + getattr(ob, field)
        assert np.max(np.abs(lhs - rhs)) <= 1e-6 * np.max(np.abs(lhs))


def test_carrier_leakage_with_zero_code(code63, healthy):
    s = sc.Scenario(code63, stimulus=False)
    d, _ = sc.run_chain(s).sequence(0)
    d0, _ = healthy.sequence(0)
    assert np.sqrt(np.mean(d**2)) <= 1e-3 * np.sqrt(np.mean(d0**2))


def test_measurand_only(code63):
    s = sc.Scenario(code63, stimulus=False, measurand=(sc.Sine(0.5, 10.0),), n_sequences=2)
    out = sc.run_chain(s)
    n = out.v_out.size
    t = np.arange(n) / FS
    expected = 0.5 * sensor.G_ACCEL * np.cos(2 * np.pi * 10 * t)
    tail = slice(n // 2, None)
    # 10 Hz is inside the passband: within 1 dB and a modest phase lag
    ratio = np.sqrt(np.mean(out.v_out[tail] ** 2) / np.mean(expected[tail] ** 2))
    assert abs(20 * np.log10(ratio)) <= 1.0
    assert np.sqrt(np.mean(out.v_demod[out.v_demod.size // 2:] ** 2)) < 1e-3


def test_stimulus_residue_at_operational_output(healthy):
    tail = healthy.v_out[healthy.v_out.size // 2:]
    assert np.max(np.abs(tail)) / sensor.G_ACCEL < 1e-3


def test_square_carrier_gain(code63, healthy):
    cfg = sc.ChainConfig(carrier_shape="square")
    d, c = sc.run_chain(sc.Scenario(code63, cfg)).sequence(0)
    d0, c0 = healthy.sequence(0)
    ratio = te.covariance(d, c) / te.covariance(d0, c0)
    assert ratio == pytest.approx(4 / np.pi, rel=0.02)


def test_outputs_layout_and_determinism(code63):
    s = sc.Scenario(code63, n_sequences=2, noise_rms=0.01, seed=7)
    a, b = sc.run_chain(s), sc.run_chain(s)
    assert a.samples_per_sequence == 504
    assert a.n_sequences == 2
    assert a.v_demod.size == 3 * 504
    assert a.duration == pytest.approx(3 * 0.63)
    assert np.array_equal(a.v_demod, b.v_demod)
    with pytest.raises(IndexError):
        a.sequence(2)
    c = sc.run_chain(s.replace(seed=8))
    assert not np.array_equal(a.v_demod, c.v_demod)


@pytest.mark.parametrize("kw,match", [
    (dict(output_rate=700.0), "integer multiple"),
    (dict(carrier_freq=1250.0), "physical bandwidth"),
    (dict(operational_filter=sc.FilterSpec("lowpass", 100.0, 1)), "attenuates only"),
    (dict(carrier_shape="triangle"), "carrier_shape"),
])
def test_config_validation(kw, match):
    with pytest.raises(ValueError, match=match):
        sc.ChainConfig(**kw)


def test_scenario_rate_mismatch(code63):
    with pytest.raises(ValueError, match="chip rate"):
        sc.Scenario(code63, sc.ChainConfig(chip_rate=50.0))
