"""Maximum-length sequences from a Fibonacci LFSR and their spectra."""

from dataclasses import dataclass, field

import numpy as np

from . import kernels

MAX_ORDER = 20

# Fibonacci taps (1-based) of primitive polynomials x^n + ... + 1.
PRIMITIVE_TAPS = {
    2: (2, 1),
    3: (3, 2),
    4: (4, 3),
    5: (5, 3),
    6: (6, 5),
    7: (7, 6),
    8: (8, 6, 5, 4),
    9: (9, 5),
    10: (10, 7),
    11: (11, 9),
    12: (12, 6, 4, 1),
    13: (13, 4, 3, 1),
    14: (14, 5, 3, 1),
    15: (15, 14),
    16: (16, 15, 13, 4),
    17: (17, 14),
    18: (18, 11),
    19: (19, 6, 2, 1),
    20: (20, 17),
}


class LfsrError(ValueError):
    pass


@dataclass(frozen=True)
class LfsrSpec:
    """Register length, feedback taps and initial state of an LFSR.

    ``seed`` is an integer whose bit ``i - 1`` holds register cell ``i``; cell
    ``order`` is the output. ``seed=None`` means all ones.
    """

    order: int
    taps: tuple = None
    seed: int = None

    def __post_init__(self):
        if not 2 <= self.order <= MAX_ORDER:
            raise LfsrError(f"order must be in 2..{MAX_ORDER}, got {self.order}")
        taps = self.taps
        if taps is None:
            if self.order not in PRIMITIVE_TAPS:
                raise LfsrError(f"no built-in taps for order {self.order}")
            taps = PRIMITIVE_TAPS[self.order]
        taps = tuple(sorted({int(t) for t in taps}, reverse=True))
        if any(t < 1 or t > self.order for t in taps):
            raise LfsrError(f"taps must lie in 1..{self.order}: {taps}")
        if self.order not in taps:
            raise LfsrError(f"order {self.order} must be one of the taps")
        object.__setattr__(self, "taps", taps)
        seed = (1 << self.order) - 1 if self.seed is None else int(self.seed)
        if seed & ((1 << self.order) - 1) == 0 or seed >> self.order:
            raise LfsrError(f"seed {seed:#x} is not a nonzero {self.order}-bit state")
        object.__setattr__(self, "seed", seed)

    @property
    def tapmask(self):
        return sum(1 << (t - 1) for t in self.taps)

    @property
    def length(self):
        return (1 << self.order) - 1


@dataclass(frozen=True)
class CodeSequence:
    chips: np.ndarray = field(repr=False)
    chip_rate: float
    spec: LfsrSpec

    def __post_init__(self):
        chips = np.asarray(self.chips, dtype=np.int8)
        chips.setflags(write=False)
        object.__setattr__(self, "chips", chips)

    @property
    def n_bits(self):
        return self.chips.size

    @property
    def duration(self):
        """Test time of one full sequence in seconds."""
        return self.n_bits / self.chip_rate


@dataclass(frozen=True)
class CodeSpectrum:
    coefficients: np.ndarray = field(repr=False)
    sample_interval: float
    psd: np.ndarray = field(repr=False)

    @property
    def n(self):
        return self.coefficients.size

    @property
    def freqs(self):
        """Frequency of bin k (0-based) = k / (N tau_s)."""
        return np.arange(self.n) / (self.n * self.sample_interval)


def lfsr_step(state, spec):
    """Advance the register once. Returns ``(chip, next_state)``."""
    if state == 0:
        raise LfsrError("degenerate LFSR state")
    order = spec.order
    chip = 1 if (state >> (order - 1)) & 1 else -1
    fb = bin(state & spec.tapmask).count("1") & 1
    return chip, ((state << 1) | fb) & ((1 << order) - 1)


def generate_mls(spec):
    """One full period of the sequence as a ±1 :class:`CodeSequence` at unit chip rate.

    Raises :class:`LfsrError` if the taps do not yield the maximal period.
    """
    period = kernels.lfsr_period(spec.seed, spec.tapmask, spec.order, spec.length)
    if period != spec.length:
        raise LfsrError(
            f"sequence period shorter than 2^n - 1 for taps {spec.taps} "
            f"(expected {spec.length})"
        )
    bits, _ = kernels.lfsr_bits(spec.seed, spec.tapmask, spec.order, spec.length)
    return CodeSequence(2 * bits.astype(np.int8) - 1, 1.0, spec)


def make_code(order, chip_rate, taps=None, seed=None):
    code = generate_mls(LfsrSpec(order, taps, seed))
    return CodeSequence(code.chips, float(chip_rate), code.spec)


def samples_per_chip(code, sample_rate):
    return sample_rate / code.chip_rate


def code_waveform(code, sample_rate, periods=1):
    """Zero-order-hold rendering of the chip stream at ``sample_rate``."""
    if sample_rate < 2 * code.chip_rate:
        raise ValueError(
            f"undersampled code: {sample_rate} Hz < 2 x {code.chip_rate} Hz chip rate"
        )
    n = int(np.floor(periods * code.n_bits * sample_rate / code.chip_rate + 1e-9))
    idx = np.floor(np.arange(n) * code.chip_rate / sample_rate + 1e-9).astype(np.int64)
    return code.chips[idx % code.n_bits].astype(float)


def waveform_dft(samples, sample_interval):
    samples = np.asarray(samples, dtype=float)
    if samples.size == 0:
        raise ValueError("empty waveform")
    if sample_interval <= 0:
        raise ValueError("sample interval must be positive")
    # C_k = sum_n v[n] exp(-2j pi k n / N), k = 0..N-1
    coeffs = np.fft.fft(samples)
    psd = np.abs(coeffs) ** 2 * sample_interval / samples.size
    return CodeSpectrum(coeffs, float(sample_interval), psd)


def code_dft(code, sample_interval):
    """DFT of one sequence sampled every ``sample_interval`` seconds."""
    return waveform_dft(code_waveform(code, 1.0 / sample_interval), sample_interval)


def psd_envelope(f, f_clock):
    """sinc^2 envelope of the code power spectral density (per Hz)."""
    if f_clock <= 0:
        raise ValueError("clock frequency must be positive")
    return np.sinc(np.asarray(f, dtype=float) / f_clock) ** 2 / f_clock


def flat_band_coefficient(code, sample_interval):
    """Low-frequency approximation of |C_f| for one sequence at ``sample_interval``."""
    n = code_waveform(code, 1.0 / sample_interval).size
    return np.sqrt(n / (code.chip_rate * sample_interval))


def circular_autocorrelation(chips):
    """Integer circular autocorrelation sum_i c[i] c[i+lag] for every lag."""
    c = np.asarray(chips, dtype=np.int64)
    return np.array([int(np.dot(c, np.roll(c, -lag))) for lag in range(c.size)])
