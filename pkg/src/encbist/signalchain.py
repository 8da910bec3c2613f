"""Stimulus encoding, sensor excitation, filtering and synchronous demodulation.

Everything runs at ``internal_rate`` (64 kHz by default); the demodulated test
signal is decimated to ``output_rate`` (800 Hz) for the covariance engine.
"""

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy import signal

from . import kernels, mls, sensor


@dataclass(frozen=True)
class FilterSpec:
    kind: str
    cutoff: float
    order: int

    def __post_init__(self):
        if self.kind not in ("lowpass", "highpass"):
            raise ValueError(f"unknown filter kind {self.kind!r}")
        if self.cutoff <= 0 or self.order < 1:
            raise ValueError("filter cutoff and order must be positive")

    def sos(self, rate):
        if self.cutoff >= rate / 2:
            raise ValueError(f"cutoff {self.cutoff} Hz is not below Nyquist ({rate / 2} Hz)")
        return _butter(self.order, self.cutoff, self.kind, rate)

    def gain(self, f, rate):
        _, h = signal.sosfreqz(self.sos(rate), worN=np.atleast_1d(f), fs=rate)
        return h


@lru_cache(maxsize=64)
def _butter(order, cutoff, kind, rate):
    sos = signal.butter(order, cutoff, btype=kind, fs=rate, output="sos")
    sos.setflags(write=False)
    return sos


@dataclass(frozen=True)
class Sine:
    """Acceleration component ``amplitude * cos(2 pi f t + phase)`` in g."""

    amplitude: float
    frequency: float
    phase: float = 0.0

    def render(self, t):
        return self.amplitude * np.cos(2 * np.pi * self.frequency * t + self.phase)


@dataclass(frozen=True)
class ChainConfig:
    carrier_freq: float = 1000.0
    carrier_shape: str = "sine"
    chip_rate: float = 100.0
    lp2_cutoff: float = None
    operational_filter: FilterSpec = FilterSpec("lowpass", 100.0, 4)
    test_filter: FilterSpec = FilterSpec("highpass", 300.0, 2)
    demod_lowpass: FilterSpec = FilterSpec("lowpass", 150.0, 5)
    lp2_order: int = 2
    demod_phase_error: float = 0.0
    internal_rate: float = sensor.INTERNAL_RATE
    output_rate: float = 800.0
    stimulus_amplitude: float = 0.05
    physical_bandwidth: float = sensor.PHYSICAL_BANDWIDTH
    min_operational_attenuation_db: float = 40.0

    def __post_init__(self):
        if self.lp2_cutoff is None:
            object.__setattr__(self, "lp2_cutoff", 3.0 * self.chip_rate)
        if self.carrier_shape not in ("sine", "square"):
            raise ValueError(f"carrier_shape must be 'sine' or 'square', not {self.carrier_shape!r}")
        ratio = self.internal_rate / self.output_rate
        if abs(ratio - round(ratio)) > 1e-9 or ratio < 1:
            raise ValueError("internal_rate must be an integer multiple of output_rate")
        if not 0 < self.carrier_freq < self.internal_rate / 2:
            raise ValueError("carrier frequency must lie below the internal Nyquist rate")
        if self.chip_rate <= 0:
            raise ValueError("chip rate must be positive")
        if self.carrier_freq + self.chip_rate > self.physical_bandwidth:
            raise ValueError(
                f"test band up to {self.carrier_freq + self.chip_rate} Hz exceeds the "
                f"physical bandwidth {self.physical_bandwidth} Hz"
            )
        if not 0 < self.lp2_cutoff < self.internal_rate / 2:
            raise ValueError("invalid LP2 cutoff")
        att = self.operational_attenuation_db()
        if att < self.min_operational_attenuation_db:
            raise ValueError(
                f"operational filter attenuates only {att:.1f} dB at {self.carrier_freq} Hz"
            )

    @property
    def decimation(self):
        return int(round(self.internal_rate / self.output_rate))

    def operational_attenuation_db(self):
        h = self.operational_filter.gain(self.carrier_freq, self.internal_rate)
        return float(-20 * np.log10(abs(h[0])))


@dataclass
class ChainOutputs:
    v_out: np.ndarray
    v_demod: np.ndarray
    v_code: np.ndarray
    internal_rate: float
    output_rate: float
    samples_per_sequence: int
    warmup_sequences: int

    @property
    def duration(self):
        return self.v_demod.size / self.output_rate

    @property
    def n_sequences(self):
        return self.v_demod.size // self.samples_per_sequence - self.warmup_sequences

    def sequence(self, i=0):
        """Demodulated output and aligned code reference for sequence ``i`` after warm-up."""
        if not 0 <= i < self.n_sequences:
            raise IndexError(f"sequence {i} out of range ({self.n_sequences} available)")
        n = self.samples_per_sequence
        start = (self.warmup_sequences + i) * n
        return self.v_demod[start:start + n], self.v_code[start:start + n]


@dataclass(frozen=True)
class Scenario:
    code: mls.CodeSequence
    config: ChainConfig = field(default_factory=ChainConfig)
    model: sensor.SensorModel = None
    fault: sensor.FaultScenario = sensor.HEALTHY
    measurand: tuple = ()
    perturbation: tuple = ()
    stimulus: bool = True
    encoded: bool = True
    noise_rms: float = 0.0
    seed: int = 0
    n_sequences: int = 1
    warmup_sequences: int = 1

    def __post_init__(self):
        if self.model is None:
            object.__setattr__(self, "model", sensor.default_model())
        object.__setattr__(self, "measurand", tuple(self.measurand))
        object.__setattr__(self, "perturbation", tuple(self.perturbation))
        if abs(self.code.chip_rate - self.config.chip_rate) > 1e-9:
            raise ValueError(
                f"code chip rate {self.code.chip_rate} Hz differs from chain chip rate "
                f"{self.config.chip_rate} Hz"
            )
        if self.n_sequences < 1 or self.warmup_sequences < 0:
            raise ValueError("need at least one evaluated sequence")

    def replace(self, **changes):
        from dataclasses import replace

        return replace(self, **changes)


def shape_code(code_wave, lp2_cutoff, rate, order=2):
    """Low-pass the rendered code (LP2) to trim its out-of-band power."""
    if not 0 < lp2_cutoff < rate / 2:
        raise ValueError(f"invalid LP2 cutoff {lp2_cutoff} Hz at {rate} Hz")
    y, _ = kernels.sosfilt(_butter(order, lp2_cutoff, "lowpass", rate), code_wave)
    return y


def carrier(t, f_t, shape="sine", phase=0.0):
    if shape == "sine":
        return np.cos(2 * np.pi * f_t * t + phase)
    if shape == "square":
        frac = np.mod(f_t * t + phase / (2 * np.pi), 1.0)
        return np.where((frac < 0.25) | (frac >= 0.75), 1.0, -1.0)
    raise ValueError(f"unknown carrier shape {shape!r}")


def modulate(baseband, f_t, shape, rate, amplitude=0.05):
    """Stimulus acceleration (g): ``amplitude * baseband * carrier``."""
    if not 0 < f_t < rate / 2:
        raise ValueError("carrier frequency must lie below Nyquist")
    t = np.arange(len(baseband)) / rate
    return amplitude * np.asarray(baseband, dtype=float) * carrier(t, f_t, shape)


def operational_path(v_sensor, config):
    y, _ = kernels.sosfilt(config.operational_filter.sos(config.internal_rate), v_sensor)
    return y


def test_path(v_sensor, config):
    y, _ = kernels.sosfilt(config.test_filter.sos(config.internal_rate), v_sensor)
    return y


def demod_phase(config, model):
    """Carrier phase at the demodulator input for the healthy sensor and test filter."""
    b, a = sensor.discretize(model, config.internal_rate)
    _, hs = signal.freqz(b, a, worN=[config.carrier_freq], fs=config.internal_rate)
    ht = config.test_filter.gain(config.carrier_freq, config.internal_rate)
    return float(np.angle(hs[0] * ht[0]))


def relative_gain(config, model, f):
    """Complex gain of a tone at ``f`` Hz through sensor, test filter, mixer and
    demodulator low-pass, relative to the code's gain at the carrier.

    The demodulated tone is ``|g| cos(2 pi (f - f_t) t + phase + arg g)`` when the
    input is ``cos(2 pi f t + phase)``.
    """
    f = np.atleast_1d(np.asarray(f, dtype=float))
    rate = config.internal_rate
    h = sensor.output_per_g(model, f) * config.test_filter.gain(f, rate)
    h0 = sensor.output_per_g(model, config.carrier_freq) * config.test_filter.gain(
        config.carrier_freq, rate)[0]
    fb = f - config.carrier_freq
    lp = config.demod_lowpass.gain(np.abs(fb), rate)
    lp = np.where(fb < 0, np.conj(lp), lp)
    return h * lp / h0


def mix_and_filter(v_test, config, phase):
    """Multiply by the in-phase carrier and low-pass; returns the full-rate baseband."""
    t = np.arange(len(v_test)) / config.internal_rate
    lo = 2.0 * np.cos(2 * np.pi * config.carrier_freq * t + phase + config.demod_phase_error)
    y, _ = kernels.sosfilt(config.demod_lowpass.sos(config.internal_rate), v_test * lo)
    return y


def decimate(x, config):
    return np.asarray(x)[:: config.decimation]


def demodulate(v_sensor, config, model=None):
    """Test-filter, mix with the phase-locked carrier, low-pass and decimate."""
    model = model or sensor.default_model()
    baseband = mix_and_filter(test_path(v_sensor, config), config, demod_phase(config, model))
    return decimate(baseband, config)


def _timeline(scenario):
    cfg = scenario.config
    periods = scenario.warmup_sequences + scenario.n_sequences
    per_seq = scenario.code.n_bits / cfg.chip_rate * cfg.internal_rate
    if abs(per_seq - round(per_seq)) > 1e-6:
        raise ValueError("sequence duration is not a whole number of internal samples")
    n = int(round(per_seq)) * periods
    return periods, n


def stimulus_baseband(scenario):
    """LP2-shaped code (or a constant for the un-encoded scheme) at the internal rate."""
    cfg = scenario.config
    periods, n = _timeline(scenario)
    if not scenario.encoded:
        return np.ones(n)
    wave = mls.code_waveform(scenario.code, cfg.internal_rate, periods)
    return shape_code(wave, cfg.lp2_cutoff, cfg.internal_rate, cfg.lp2_order)


def acceleration(scenario, baseband=None):
    cfg = scenario.config
    _, n = _timeline(scenario)
    t = np.arange(n) / cfg.internal_rate
    acc = np.zeros(n)
    if scenario.stimulus:
        if baseband is None:
            baseband = stimulus_baseband(scenario)
        acc += modulate(baseband, cfg.carrier_freq, cfg.carrier_shape, cfg.internal_rate,
                        cfg.stimulus_amplitude)
    for comp in scenario.measurand + scenario.perturbation:
        acc += comp.render(t)
    if scenario.noise_rms > 0:
        rng = np.random.default_rng(scenario.seed)
        acc += scenario.noise_rms * rng.standard_normal(n)
    return acc


def reference_code(baseband, config):
    """Code as seen through the nominal baseband filtering (LP2 then demodulator low-pass)."""
    y, _ = kernels.sosfilt(config.demod_lowpass.sos(config.internal_rate), baseband)
    return y


def _integer_delay(a, b):
    """Lag d maximising the circular cross-correlation sum_n a[n] b[n - d]."""
    xc = np.fft.irfft(np.fft.rfft(a) * np.conj(np.fft.rfft(b)), n=a.size)
    return int(np.argmax(xc))


_delay_cache = {}


def chain_delay(scenario):
    """Latency (internal samples) of the demodulated code behind the filtered reference code.

    Measured once per (code, config, model) on a healthy, perturbation-free run.
    """
    key = (scenario.code.spec, scenario.code.chip_rate, scenario.config, scenario.model)
    if key not in _delay_cache:
        calib = scenario.replace(
            fault=sensor.HEALTHY, measurand=(), perturbation=(), noise_rms=0.0,
            stimulus=True, encoded=True, n_sequences=1, warmup_sequences=1,
        )
        baseband = stimulus_baseband(calib)
        v = sensor.simulate(calib.model, acceleration(calib, baseband),
                            sample_rate=calib.config.internal_rate)
        y = mix_and_filter(test_path(v, calib.config), calib.config,
                           demod_phase(calib.config, calib.model))
        ref = reference_code(baseband, calib.config)
        n = y.size // 2
        _delay_cache[key] = _integer_delay(y[n:], ref[n:])
    return _delay_cache[key]


def run_chain(scenario, delay=None):
    """Simulate the full architecture for one scenario."""
    cfg = scenario.config
    baseband = stimulus_baseband(scenario) if scenario.encoded else None
    acc = acceleration(scenario, baseband)
    v = sensor.simulate(scenario.model, acc, scenario.fault, cfg.internal_rate)
    v_out = operational_path(v, cfg)
    demod_full = mix_and_filter(test_path(v, cfg), cfg, demod_phase(cfg, scenario.model))
    if scenario.encoded:
        if delay is None:
            delay = chain_delay(scenario)
        # the code is periodic, so a circular shift is the steady-state delayed reference
        ref = np.roll(reference_code(baseband, cfg), delay)
    else:
        ref = np.ones_like(demod_full)
    per_seq = int(round(scenario.code.n_bits / cfg.chip_rate * cfg.output_rate))
    return ChainOutputs(
        v_out=v_out,
        v_demod=decimate(demod_full, cfg),
        v_code=decimate(ref, cfg),
        internal_rate=cfg.internal_rate,
        output_rate=cfg.output_rate,
        samples_per_sequence=per_seq,
        warmup_sequences=scenario.warmup_sequences,
    )
