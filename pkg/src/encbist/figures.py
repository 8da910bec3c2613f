"""Data behind the reproduction figures, as lists of CSV-ready rows.

Each function returns ``{filename: (header, rows)}``.
"""

import numpy as np

from . import mls, rejection, signalchain, testengine

# short demonstration code: 15 chips at 50 Hz from register state 0001
SHORT_ORDER = 4
SHORT_SEED = 0b0001
SHORT_CHIP_RATE = 50.0
DESIGN_ORDER = 6
DESIGN_CHIP_RATE = 100.0
PERTURBATION_FREQ = 1003.0


def short_code():
    return mls.make_code(SHORT_ORDER, SHORT_CHIP_RATE, seed=SHORT_SEED)


def design_code():
    return mls.make_code(DESIGN_ORDER, DESIGN_CHIP_RATE)


def window_phase(freq, carrier_freq, t0, phi=0.0):
    """Phase of a perturbation at ``freq`` whose beat with the carrier has phase ``phi`` at ``t0``."""
    return phi - 2 * np.pi * (freq - carrier_freq) * t0


def fig2(duration=1.0, amplitude=0.05, freq=PERTURBATION_FREQ):
    """Un-encoded sine stimulus with an equal co-band vibration."""
    code = short_code()
    n_seq = int(np.ceil(duration / code.duration))
    base = signalchain.Scenario(
        code, signalchain.ChainConfig(chip_rate=code.chip_rate), encoded=False,
        n_sequences=n_seq,
    )
    clean = signalchain.run_chain(base)
    pert = signalchain.run_chain(base.replace(perturbation=(signalchain.Sine(amplitude, freq),)))
    start = clean.warmup_sequences * clean.samples_per_sequence
    v_ref = float(np.mean(clean.v_demod[start:]))
    sp = rejection.end_to_end_sp(
        base.replace(perturbation=(signalchain.Sine(amplitude, freq),)), n_phases=8
    )
    t = np.arange(pert.v_demod.size - start) / pert.output_rate
    rows = [(ti, v / v_ref) for ti, v in zip(t, pert.v_demod[start:])]
    summary = [("v_ref", v_ref), ("k", amplitude / base.config.stimulus_amplitude),
               ("sp", sp), ("sp_db", 20 * np.log10(sp))]
    return {
        "fig2.csv": (("t_s", "v_test_rel"), rows),
        "fig2_summary.csv": (("metric", "value"), summary),
    }


def fig4_scenario(amplitude=0.05, freq=PERTURBATION_FREQ, phi=0.0):
    """Encoded 15-chip stimulus at 50 Hz with a co-band vibration.

    ``phi`` is the phase of the down-shifted perturbation at the start of the
    evaluated sequence.
    """
    code = short_code()
    cfg = signalchain.ChainConfig(chip_rate=code.chip_rate)
    base = signalchain.Scenario(code, cfg)
    t0 = base.warmup_sequences * code.duration
    return base.replace(
        perturbation=(signalchain.Sine(amplitude, freq, window_phase(freq, cfg.carrier_freq, t0, phi)),)
    )


def fig4_variation(phi=0.0):
    scenario = fig4_scenario(phi=phi)
    clean = signalchain.run_chain(scenario.replace(perturbation=()))
    pert = signalchain.run_chain(scenario)
    cov_ref = testengine.covariance(*clean.sequence(0))
    cov = testengine.covariance(*pert.sequence(0))
    return (cov - cov_ref) / cov_ref, clean, pert, cov_ref, cov


def fig4():
    rel, clean, pert, cov_ref, cov = fig4_variation()
    d, c = pert.sequence(0)
    d0, _ = clean.sequence(0)
    t = np.arange(d.size) / pert.output_rate
    rows = list(zip(t, c, d0, d))
    rej = -20 * np.log10(abs(rel)) if rel != 0 else np.inf
    summary = [("cov_ref", cov_ref), ("cov", cov), ("rel_cov_variation", rel),
               ("rejection_db", rej), ("cor", testengine.correlation(d, c))]
    return {
        "fig4.csv": (("t_s", "code_ref", "v_demod_clean", "v_demod"), rows),
        "fig4_summary.csv": (("metric", "value"), summary),
    }


def fig5_grid(code, step=0.1, sample_rate=rejection.TEST_RATE):
    fine = rejection.fine_grid(code, step)
    grid = rejection.dft_grid(code, sample_rate, min_spacing=0.0)
    return np.unique(np.round(np.concatenate([fine, grid]), 12))


def fig5(step=0.1):
    code = short_code()
    curve = rejection.sweep(code, fig5_grid(code, step))
    rows = list(zip(curve.freqs, curve.sp_exact_db, curve.sp_fft_db))
    return {"fig5.csv": (("f_hz", "sp_cov_db", "sp_fft_db"), rows)}


def fig6(orders=range(3, 11), chip_rate=DESIGN_CHIP_RATE):
    summary = []
    curves = []
    for order in orders:
        code = mls.make_code(order, chip_rate)
        curve = rejection.sweep(code)
        f_w, sp_w = rejection.worst_case(code)
        summary.append((
            code.n_bits, chip_rate, code.duration,
            20 * np.log10(rejection.sp_rms(code.n_bits)),
            20 * np.log10(rejection.flat_band_rms(code)),
            20 * np.log10(sp_w), f_w,
        ))
        curves.extend((code.n_bits, f, e, ff) for f, e, ff in
                      zip(curve.freqs, curve.sp_exact_db, curve.sp_fft_db))
    return {
        "fig6.csv": (("n_bits", "chip_rate_hz", "test_time_s", "sp_rms_formula_db",
                      "sp_rms_flat_band_db", "sp_max_db", "f_worst_hz"), summary),
        "fig6_curves.csv": (("n_bits", "f_hz", "sp_cov_db", "sp_fft_db"), curves),
    }


def fig7(k_max=2.0, step=0.02, rejections_db=(14.0, 20.0, 30.0)):
    ks = np.round(np.arange(0.0, k_max + step / 2, step), 10)
    cols = [testengine.correlation_model(ks, 10 ** (-r / 20)) for r in rejections_db]
    rows = [(k, *vals) for k, vals in zip(ks, zip(*cols))]
    header = ("k", *(f"cor_rej{int(r)}db" for r in rejections_db))
    return {"fig7.csv": (header, rows)}


FIGURES = {"fig2": fig2, "fig4": fig4, "fig5": fig5, "fig6": fig6, "fig7": fig7}
