"""Calibration and test sessions tying the chain to the test engine."""

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from . import mls, rejection, sensor, signalchain, testengine


def calibration_scenario(scenario):
    """The healthy, perturbation-free, noise-free version of ``scenario``."""
    return scenario.replace(
        fault=sensor.HEALTHY, perturbation=(), measurand=(), noise_rms=0.0,
        n_sequences=1, encoded=True, stimulus=True,
    )


_ref_cache = {}


def calibrate(scenario, cov_tolerance=0.08, cor_threshold=0.97):
    """Reference Cov and Cor measured on the calibration run."""
    calib = calibration_scenario(scenario)
    key = (calib.code.spec, calib.code.chip_rate, calib.config, calib.model,
           calib.warmup_sequences)
    if key not in _ref_cache:
        d, c = signalchain.run_chain(calib).sequence(0)
        _ref_cache[key] = (testengine.covariance(d, c), testengine.correlation(d, c))
    cov_ref, cor_ref = _ref_cache[key]
    return testengine.TestReference(cov_ref, cor_ref, cov_tolerance, cor_threshold)


@lru_cache(maxsize=None)
def worst_sp(spec, chip_rate, sample_rate=rejection.TEST_RATE):
    """Worst-case SP of a code over frequency and phase (fine scan)."""
    code = mls.generate_mls(spec)
    code = mls.CodeSequence(code.chips, chip_rate, spec)
    return rejection.worst_case(code, sample_rate)[1]


def sp_worst_for(scenario):
    return worst_sp(scenario.code.spec, scenario.code.chip_rate, scenario.config.output_rate)


def run_test(scenario, ref=None, average=False):
    """Simulate ``scenario`` and return its verdict (first sequence, or averaged)."""
    ref = ref or calibrate(scenario)
    out = signalchain.run_chain(scenario)
    sp = sp_worst_for(scenario)
    if average and out.n_sequences > 1:
        return testengine.evaluate_average(
            [out.sequence(i) for i in range(out.n_sequences)], ref, sp
        )
    return testengine.evaluate(*out.sequence(0), ref, sp)


@dataclass(frozen=True)
class SessionRow:
    sequence_id: int
    order: int
    verdict: testengine.TestVerdict


def advance_phases(components, elapsed):
    """Perturbation components as seen ``elapsed`` seconds later."""
    return tuple(
        signalchain.Sine(c.amplitude, c.frequency, c.phase + 2 * np.pi * c.frequency * elapsed)
        for c in components
    )


def run_session(build, n_tests, base_order, max_order=10, adaptive=True,
                cov_tolerance=0.08, cor_threshold=0.97, average=False):
    """Run ``n_tests`` consecutive tests.

    ``build(order)`` returns the scenario for a code of that order. Perturbation
    and measurand phases advance with elapsed test time and each test gets its
    own noise seed, so consecutive tests see a continuous environment.
    """
    policy = testengine.AdaptiveCodeLength(base_order, max_order)
    rows = []
    elapsed = 0.0
    for i in range(n_tests):
        order = policy.order if adaptive else base_order
        scenario = build(order)
        ref = calibrate(scenario, cov_tolerance, cor_threshold)
        run = scenario.replace(
            perturbation=advance_phases(scenario.perturbation, elapsed),
            measurand=advance_phases(scenario.measurand, elapsed),
            seed=scenario.seed + i,
        )
        verdict = run_test(run, ref, average)
        rows.append(SessionRow(i, order, verdict))
        policy.record(verdict.decision)
        # warm-up is a simulation artefact; consecutive evaluation windows abut
        elapsed += scenario.n_sequences * scenario.code.duration
    return rows
