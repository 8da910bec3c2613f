import numpy as np
import pytest
from scipy.integrate import quad

from encbist import mls, rejection as rj, signalchain as sc, testengine as te
from conftest import brute_cov

DT = 1 / 800.0


@pytest.fixture(scope="module")
def code15():
    return mls.make_code(4, 50.0, taps=(4, 3), seed=0b0001)


@pytest.fixture(scope="module")
def code63():
    return mls.make_code(6, 100.0)


def test_sp_exact_zero_frequency_and_constant(code15):
    w = mls.code_waveform(code15, 800.0)
    assert rj.sp_exact(w, 0.0, np.pi / 2, DT) == pytest.approx(0.0, abs=1e-15)
    assert rj.sp_exact(w, 0.0, 0.3, DT) == pytest.approx(0.0, abs=1e-15)
    assert rj.sp_exact(np.ones_like(w), 7.3, 1.1, DT) == pytest.approx(0.0, abs=1e-15)
    with pytest.raises(ValueError):
        rj.sp_exact(w, -1.0, 0.0, DT)


def test_sp_exact_matches_direct_sum(code15):
    w = mls.code_waveform(code15, 800.0)
    cos_ = [np.cos(2 * np.pi * 3.0 * n * DT) for n in range(w.size)]
    assert rj.sp_exact(w, 3.0, 0.0, DT) == pytest.approx(brute_cov(list(w), cos_), abs=1e-12)


@pytest.mark.parametrize("f", [0.0, 0.5, 3.0, 3.333, 12.0, 49.0])
def test_sp_max_is_phase_scan_maximum(code15, f):
    w = mls.code_waveform(code15, 800.0)
    phis = np.arange(360) * (2 * np.pi / 360)
    scan = np.array([rj.sp_exact(w, f, p, DT) for p in phis])
    peak = rj.sp_max_exact(w, f, DT)
    assert scan.max() <= peak + 1e-12
    assert scan.max() == pytest.approx(peak, abs=1e-6 + 1e-4 * peak)
    phi_star = rj.worst_phase(w, f, DT)
    if peak > 1e-12:
        assert rj.sp_exact(w, f, phi_star, DT) == pytest.approx(peak, abs=1e-12)


def test_sp_max_constant_code():
    assert rj.sp_max_exact(np.ones(240), 3.0, DT) == pytest.approx(0.0, abs=1e-15)


def test_short_code_worst_rejection(code15):
    f, sp = rj.worst_case(code15)
    assert rj.rejection_db(sp) == pytest.approx(6.7, abs=1.5)


def test_sp_max_fft_on_and_off_grid(code15):
    w = mls.code_waveform(code15, 800.0)
    spec = mls.waveform_dft(w, DT)
    df = 800.0 / w.size
    assert rj.sp_max_fft(spec, 3 * df) == pytest.approx(abs(spec.coefficients[3]) / w.size)
    with pytest.raises(ValueError, match="FFT approximation defined on DFT grid"):
        rj.sp_max_fft(spec, 1.7 * df)


def test_dc_bin_diverges_from_exact(code15):
    w = mls.code_waveform(code15, 800.0)
    spec = mls.waveform_dft(w, DT)
    assert rj.sp_max_fft(spec, 0.0) == pytest.approx(abs(w.mean()))
    assert rj.sp_max_fft(spec, 0.0) == pytest.approx(1 / 15)
    assert rj.sp_max_exact(w, 0.0, DT) == pytest.approx(0.0, abs=1e-15)


@pytest.mark.parametrize("order,rate", [(4, 50.0), (6, 100.0), (8, 100.0)])
def test_exact_and_fft_agree_above_two_over_tau(order, rate):
    code = mls.make_code(order, rate)
    curve = rj.sweep(code)
    tau = code.n_bits / rate
    sel = curve.freqs > 2 / tau
    a, b = curve.sp_exact[sel], curve.sp_fft[sel]
    # numerical zeros at the sinc nulls carry no dB information
    real = (a > 1e-9) | (b > 1e-9)
    assert np.all(np.abs(20 * np.log10(a[real] / b[real])) <= 1.0)


def test_sweep_shape_and_determinism(code15):
    freqs = np.linspace(0.1, 50, 77)
    a, b = rj.sweep(code15, freqs), rj.sweep(code15, freqs)
    assert a.freqs.shape == a.sp_exact.shape == a.sp_fft.shape == (77,)
    assert np.array_equal(a.sp_exact, b.sp_exact)
    assert np.all((a.sp_exact > 0) & (a.sp_exact <= 1))
    assert a.n_bits == 15 and a.chip_rate == 50.0
    assert a.code_duration == pytest.approx(0.3)
    with pytest.raises(ValueError):
        rj.sweep(code15, [])


def test_dft_grid(code15):
    g = rj.dft_grid(code15)
    assert g[0] == 0 and g[-1] == pytest.approx(50.0)
    assert np.all(np.diff(g) >= 1.0 - 1e-12)
    fine = rj.dft_grid(code15, min_spacing=0.0)
    assert np.allclose(np.diff(fine), 800.0 / 240)


def test_sp_rms_values():
    assert rj.sp_rms(63) == pytest.approx(0.1260, abs=1e-4)
    assert 20 * np.log10(rj.sp_rms(63)) == pytest.approx(-17.8, abs=0.5)
    assert rj.sp_rms(1) == 1.0
    with pytest.raises(ValueError):
        rj.sp_rms(0)


@pytest.mark.parametrize("order", range(4, 9))
def test_flat_band_rms_close_to_sqrt_inverse_nbits(order):
    code = mls.make_code(order, 100.0)
    rms = rj.flat_band_rms(code)
    assert abs(20 * np.log10(rms / rj.sp_rms(code.n_bits))) <= 1.0


@pytest.mark.parametrize("order", range(4, 9))
def test_half_chip_rate_band_follows_envelope(order):
    # out to f_c / 2 the sinc^2 roll-off costs about 1.1 dB on average
    code = mls.make_code(order, 100.0)
    rms = rj.flat_band_rms(code, band=code.chip_rate / 2)
    droop = np.sqrt(quad(lambda x: np.sinc(x) ** 2, 0, 0.5)[0] / 0.5)
    assert abs(20 * np.log10(rms / (droop * rj.sp_rms(code.n_bits)))) <= 0.3


def test_flat_band_edge():
    edge = rj.flat_band_edge(100.0)
    assert mls.psd_envelope(edge, 100.0) * 100.0 == pytest.approx(10 ** (-0.1), rel=1e-9)
    assert 25 < edge < 27


def test_octave_slope():
    slope, r2 = rj.octave_slope(range(3, 9))
    assert slope == pytest.approx(-3.0, abs=0.5)
    assert r2 >= 0.98


@pytest.mark.parametrize("sp,db", [(1.0, 0.0), (0.05, 26.0), (0.1995, 14.0)])
def test_rejection_db(sp, db):
    assert rj.rejection_db(sp) == pytest.approx(db, abs=0.05)


@pytest.mark.parametrize("sp", [0.0, -0.1])
def test_rejection_db_rejects_nonpositive(sp):
    with pytest.raises(ValueError):
        rj.rejection_db(sp)


def test_required_rejection():
    assert rj.required_rejection(15.0, 0.05, 0.02) == pytest.approx(83.5, abs=0.05)
    assert rj.required_rejection(0.05, 0.05, 1.0) == pytest.approx(0.0, abs=1e-12)
    assert rj.required_rejection(0.05, 0.05, 0.08) == pytest.approx(21.9, abs=0.05)
    # inverse of the accuracy bound
    sp = 10 ** (-rj.required_rejection(15.0, 0.05, 0.02) / 20)
    assert te.accuracy_bound(15.0 / 0.05, sp) == pytest.approx(0.02)
    with pytest.raises(ValueError):
        rj.required_rejection(0.0, 0.05, 0.02)


def test_covariance_distributivity(code63, rng):
    w = mls.code_waveform(code63, 800.0)
    for k in (0.0, 0.3, 2.0):
        p = rng.standard_normal(w.size)
        lhs = te.covariance(w + k * p, w)
        rhs = te.covariance(w, w) + k * te.covariance(p, w)
        assert lhs == pytest.approx(rhs, abs=1e-9)


def test_end_to_end_matches_analytic_worst_case(code63):
    f, sp = rj.worst_case(code63)
    s = sc.Scenario(code63, perturbation=(sc.Sine(0.05, 1000.0 + f),))
    measured = rj.end_to_end_sp(s, n_phases=24)
    assert abs(20 * np.log10(measured / sp)) <= 3.0
    assert rj.rejection_db(measured) >= 12.0


def test_end_to_end_fifteen_chip_code(code15):
    cfg = sc.ChainConfig(chip_rate=50.0)
    s = sc.Scenario(code15, cfg, perturbation=(sc.Sine(0.05, 1003.0),))
    measured = rj.end_to_end_sp(s, n_phases=24)
    analytic = rj.sp_max_exact(mls.code_waveform(code15, 800.0), 3.0, DT)
    assert abs(20 * np.log10(measured / analytic)) <= 3.0


def test_end_to_end_floor_without_perturbation(code63):
    assert rj.end_to_end_sp(sc.Scenario(code63)) < 0.01


def test_unencoded_baseline_has_no_rejection(code15):
    s = sc.Scenario(code15, sc.ChainConfig(chip_rate=50.0), encoded=False,
                    perturbation=(sc.Sine(0.05, 1003.0),), n_sequences=4)
    assert rj.rejection_db(rj.end_to_end_sp(s, 8)) == pytest.approx(0.0, abs=1.0)


def test_amplitude_ratio(code63):
    s = sc.Scenario(code63, perturbation=(sc.Sine(0.02, 1003.0), sc.Sine(0.03, 990.0)))
    assert rj.amplitude_ratio(s) == pytest.approx(1.0)


def test_predicted_correlation_needs_one_tone(code63):
    with pytest.raises(ValueError):
        rj.predicted_correlation(sc.Scenario(code63))
