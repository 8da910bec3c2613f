"""Sensitivity to perturbation (SP) of the covariance test output.

SP is the relative covariance error per unit perturbation/stimulus amplitude
ratio. For a sine perturbation it equals the covariance of the code with the
down-shifted sine, evaluated on the code sampled at the test rate (800 Hz by
default, 8 samples per chip at 100 Hz).
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from . import kernels, mls, signalchain, testengine

TEST_RATE = 800.0


@dataclass(frozen=True)
class RejectionCurve:
    freqs: np.ndarray = field(repr=False)
    sp_exact: np.ndarray = field(repr=False)
    sp_fft: np.ndarray = field(repr=False)
    n_bits: int
    chip_rate: float

    @property
    def sp_exact_db(self):
        return sp_db(self.sp_exact)

    @property
    def sp_fft_db(self):
        return sp_db(self.sp_fft)

    @property
    def code_duration(self):
        return self.n_bits / self.chip_rate


def sp_db(sp):
    sp = np.asarray(sp, dtype=float)
    with np.errstate(divide="ignore"):
        return 20 * np.log10(sp)


def rejection_db(sp):
    """Rejection in dB, i.e. -20 log10(SP)."""
    sp = np.asarray(sp, dtype=float)
    if np.any(~(sp > 0)):
        raise ValueError("SP must be strictly positive")
    out = -20 * np.log10(sp)
    return float(out) if out.ndim == 0 else out


def sp_exact(code_wave, f, phi, tau_s):
    """cov(code, cos(2 pi f t + phi)) with the one-sequence covariance estimator."""
    if f < 0:
        raise ValueError("frequency must be nonnegative")
    code_wave = np.asarray(code_wave, dtype=float)
    t = np.arange(code_wave.size) * tau_s
    return testengine.covariance(code_wave, np.cos(2 * np.pi * f * t + phi))


def sp_max_exact(code_wave, f, tau_s):
    """Worst case of :func:`sp_exact` over the perturbation phase.

    cov(code, cos(wt + phi)) = a cos(phi) - b sin(phi) with a, b the covariances
    with cos and sin, so the maximum over phi is hypot(a, b).
    """
    f_arr = np.asarray(f, dtype=float)
    if np.any(f_arr < 0):
        raise ValueError("frequency must be nonnegative")
    cc, ss = kernels.quadrature_cov(code_wave, f_arr.ravel(), tau_s)
    out = np.hypot(cc, ss).reshape(f_arr.shape)
    return float(out) if out.ndim == 0 else out


def worst_phase(code_wave, f, tau_s):
    """Phase maximising :func:`sp_exact` at frequency ``f``."""
    cc, ss = kernels.quadrature_cov(code_wave, [f], tau_s)
    return float(np.arctan2(-ss[0], cc[0]))


def sp_max_fft(spectrum, f, rtol=1e-9):
    """|C_k| / N at the DFT bin of ``f``; off-grid frequencies are rejected."""
    f_arr = np.asarray(f, dtype=float)
    pos = f_arr * spectrum.n * spectrum.sample_interval
    k = np.rint(pos)
    if np.any(np.abs(pos - k) > rtol * np.maximum(1.0, np.abs(pos))) or np.any(k < 0):
        raise ValueError("FFT approximation defined on DFT grid")
    out = np.abs(spectrum.coefficients[k.astype(np.int64) % spectrum.n]) / spectrum.n
    return float(out) if out.ndim == 0 else out


def sp_rms(n_bits):
    """RMS SP over the flat low-frequency band: sqrt(1 / N_b)."""
    if n_bits < 1:
        raise ValueError("N_b must be at least 1")
    return np.sqrt(1.0 / n_bits)


def dft_grid(code, sample_rate=TEST_RATE, f_max=None, min_spacing=1.0):
    """DFT bin frequencies from 0 to ``f_max`` (default the chip rate).

    Bins are thinned so that neighbouring points are at least ``min_spacing`` apart.
    """
    f_max = code.chip_rate if f_max is None else f_max
    n = mls.code_waveform(code, sample_rate).size
    df = sample_rate / n
    step = max(1, int(np.ceil(min_spacing / df - 1e-9)))
    k = np.arange(0, int(np.floor(f_max / df + 1e-9)) + 1, step)
    return k * df


def sweep(code, freqs=None, sample_rate=TEST_RATE):
    """Exact and DFT-approximated worst-case SP over a frequency grid.

    ``sp_fft`` is NaN at frequencies that are not DFT bins.
    """
    freqs = dft_grid(code, sample_rate) if freqs is None else np.asarray(freqs, dtype=float)
    if freqs.size == 0:
        raise ValueError("empty frequency grid")
    tau_s = 1.0 / sample_rate
    wave = mls.code_waveform(code, sample_rate)
    spectrum = mls.waveform_dft(wave, tau_s)
    exact = np.atleast_1d(sp_max_exact(wave, freqs, tau_s))
    pos = freqs * wave.size * tau_s
    on_grid = np.abs(pos - np.rint(pos)) <= 1e-9 * np.maximum(1.0, np.abs(pos))
    fft = np.full(freqs.shape, np.nan)
    if on_grid.any():
        fft[on_grid] = sp_max_fft(spectrum, freqs[on_grid])
    return RejectionCurve(freqs, exact, fft, code.n_bits, code.chip_rate)


def fine_grid(code, step=0.02, f_max=None):
    f_max = code.chip_rate if f_max is None else f_max
    return np.arange(0.0, f_max + 0.5 * step, step)


def worst_case(code, sample_rate=TEST_RATE, step=0.02, f_max=None):
    """(frequency, SP) of the largest exact worst-phase SP on a fine grid."""
    freqs = fine_grid(code, step, f_max)
    wave = mls.code_waveform(code, sample_rate)
    sp = sp_max_exact(wave, freqs, 1.0 / sample_rate)
    i = int(np.argmax(sp))
    return float(freqs[i]), float(sp[i])


def flat_band_edge(chip_rate, flatness_db=1.0):
    """Frequency where the sinc^2 PSD envelope has dropped ``flatness_db`` below DC."""
    target = 10 ** (-flatness_db / 10) / chip_rate
    return brentq(lambda f: mls.psd_envelope(f, chip_rate) - target, 1e-12, chip_rate)


def flat_band_rms(code, sample_rate=TEST_RATE, band=None):
    """RMS of |C_k| / N over DFT bins with 0 < f < band.

    The default band is the 1 dB-flat part of the PSD envelope (about 0.26 f_c).
    """
    band = flat_band_edge(code.chip_rate) if band is None else band
    wave = mls.code_waveform(code, sample_rate)
    spectrum = mls.waveform_dft(wave, 1.0 / sample_rate)
    f = spectrum.freqs
    sel = (f > 0) & (f < band)
    return float(np.sqrt(np.mean((np.abs(spectrum.coefficients[sel]) / spectrum.n) ** 2)))


def octave_slope(orders=range(3, 9), chip_rate=100.0, sample_rate=TEST_RATE):
    """Least-squares slope (dB per doubling of N_b) of the flat-band RMS SP, with R^2."""
    n_bits = []
    rms_db = []
    for order in orders:
        code = mls.make_code(order, chip_rate)
        n_bits.append(code.n_bits)
        rms_db.append(20 * np.log10(flat_band_rms(code, sample_rate)))
    x = np.log2(n_bits)
    y = np.asarray(rms_db)
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    r2 = 1 - np.sum(resid**2) / np.sum((y - y.mean()) ** 2)
    return float(slope), float(r2)


def required_rejection(max_perturbation, test_amplitude, required_fraction):
    """Rejection (dB) so that k_max * SP stays within ``required_fraction``."""
    if min(max_perturbation, test_amplitude, required_fraction) <= 0:
        raise ValueError("inputs must be positive")
    k_max = max_perturbation / test_amplitude
    return float(-20 * np.log10(required_fraction / k_max))


def _shift_phases(components, dphi):
    return tuple(signalchain.Sine(c.amplitude, c.frequency, c.phase + dphi) for c in components)


def amplitude_ratio(scenario):
    return sum(c.amplitude for c in scenario.perturbation) / scenario.config.stimulus_amplitude


def predicted_correlation(scenario):
    """Linear-model prediction ``(k_eff, eps, cor)`` for a one-tone perturbation.

    ``k_eff`` is the tone/code amplitude ratio at the demodulator output and
    ``eps`` the covariance of the demodulated tone shape with the unit-variance
    reference over the first evaluated sequence.  ``cor`` is relative to the
    unperturbed reference correlation and uses the tone's actual window
    variance, so it stays valid for beats slower than a couple of cycles.
    """
    if len(scenario.perturbation) != 1:
        raise ValueError("prediction needs exactly one perturbation tone")
    tone = scenario.perturbation[0]
    cfg = scenario.config
    clean = signalchain.run_chain(scenario.replace(perturbation=(), noise_rms=0.0))
    _, ref = clean.sequence(0)
    sigma = np.sqrt(testengine.covariance(ref, ref))
    g = signalchain.relative_gain(cfg, scenario.model, tone.frequency)[0]
    t0 = scenario.warmup_sequences * clean.samples_per_sequence / cfg.output_rate
    fb = tone.frequency - cfg.carrier_freq
    phase = tone.phase + np.angle(g) + 2 * np.pi * fb * t0
    phase = phase if fb >= 0 else -phase
    dt = 1.0 / cfg.output_rate
    eps = sp_exact(ref / sigma, abs(fb), phase, dt)
    tone_shape = np.cos(2 * np.pi * abs(fb) * np.arange(ref.size) * dt + phase)
    k_eff = tone.amplitude / cfg.stimulus_amplitude * abs(g) / sigma
    cor = testengine.correlation_for(k_eff, eps, testengine.covariance(tone_shape, tone_shape))
    return k_eff, eps, float(cor)


def output_errors(scenario, phases):
    """Relative test-output error for each perturbation phase offset.

    Encoded scheme: (Cov - Cov_ref) / Cov_ref on the first evaluated sequence.
    Un-encoded scheme: worst relative deviation of the demodulated level from
    its unperturbed value over the whole evaluated span.
    """
    clean = scenario.replace(perturbation=())
    ref_out = signalchain.run_chain(clean)
    errors = []
    if scenario.encoded:
        cov_ref = testengine.covariance(*ref_out.sequence(0))
        for dphi in phases:
            out = signalchain.run_chain(
                scenario.replace(perturbation=_shift_phases(scenario.perturbation, dphi))
            )
            errors.append((testengine.covariance(*out.sequence(0)) - cov_ref) / cov_ref)
    else:
        start = ref_out.warmup_sequences * ref_out.samples_per_sequence
        v_ref = float(np.mean(ref_out.v_demod[start:]))
        for dphi in phases:
            out = signalchain.run_chain(
                scenario.replace(perturbation=_shift_phases(scenario.perturbation, dphi))
            )
            dev = out.v_demod[start:] - v_ref
            errors.append(float(dev[np.argmax(np.abs(dev))]) / v_ref)
    return np.asarray(errors)


def end_to_end_sp(scenario, n_phases=24):
    """Measured SP: worst relative test-output error over a phase grid, divided by k.

    With no perturbation the error floor itself is returned.
    """
    k = amplitude_ratio(scenario)
    phases = np.arange(n_phases) * (2 * np.pi / n_phases)
    if k == 0:
        return float(np.max(np.abs(output_errors(scenario, [0.0]))))
    return float(np.max(np.abs(output_errors(scenario, phases)))) / k
