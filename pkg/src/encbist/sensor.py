"""Linearised second-order accelerometer model.

    V_out = G k_c M / (M s^2 + D s + K) * A

Accelerations are passed in g and converted to m/s^2 at the model boundary.
"""

from dataclasses import dataclass, replace
from functools import lru_cache

import numpy as np
from scipy.optimize import brentq

from . import kernels

G_ACCEL = 9.81  # m/s^2 per g
INTERNAL_RATE = 64000.0
PHYSICAL_BANDWIDTH = 1300.0
COMB_DRIVE_VOLTAGE = 0.9  # V equivalent of the 50 mg stimulus; metadata only


@dataclass(frozen=True)
class SensorModel:
    M: float
    D: float
    K: float
    G: float
    k_c: float

    def __post_init__(self):
        for name in ("M", "D", "K", "G", "k_c"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be strictly positive")

    @property
    def natural_frequency(self):
        return np.sqrt(self.K / self.M) / (2 * np.pi)

    @property
    def dc_sensitivity(self):
        """Output volts per m/s^2 at DC."""
        return self.G * self.k_c * self.M / self.K

    @property
    def damping_ratio(self):
        return self.D / (2 * np.sqrt(self.K * self.M))


@dataclass(frozen=True)
class FaultScenario:
    M: float = 1.0
    D: float = 1.0
    K: float = 1.0
    G: float = 1.0
    k_c: float = 1.0

    def __post_init__(self):
        for name in ("M", "D", "K", "G", "k_c"):
            if not getattr(self, name) > 0:
                raise ValueError(f"fault multiplier {name} must be > 0")

    def apply(self, model):
        return replace(
            model,
            M=model.M * self.M,
            D=model.D * self.D,
            K=model.K * self.K,
            G=model.G * self.G,
            k_c=model.k_c * self.k_c,
        )

    @property
    def healthy(self):
        return all(getattr(self, n) == 1.0 for n in ("M", "D", "K", "G", "k_c"))


HEALTHY = FaultScenario()


def frequency_response(model, f):
    """Complex gain in V per m/s^2 at frequency ``f`` (Hz)."""
    s = 2j * np.pi * np.asarray(f, dtype=float)
    return model.G * model.k_c * model.M / (model.M * s**2 + model.D * s + model.K)


def make_critically_damped(M, K, G, k_c):
    if M <= 0 or K <= 0:
        raise ValueError("mass and stiffness must be positive")
    return SensorModel(M=M, D=2 * np.sqrt(K * M), K=K, G=G, k_c=k_c)


@lru_cache(maxsize=None)
def default_model(bandwidth=PHYSICAL_BANDWIDTH, mass=1e-9, k_c=1e-6):
    """Critically damped model with -3 dB at ``bandwidth`` and unit DC gain.

    Unit DC gain means 1 V per m/s^2 (G k_c = K / M).
    """

    def excess(fn):
        m = make_critically_damped(mass, mass * (2 * np.pi * fn) ** 2, 1.0, 1.0)
        return abs(frequency_response(m, bandwidth)) / m.dc_sensitivity - 1 / np.sqrt(2)

    fn = brentq(excess, bandwidth * 0.5, bandwidth * 10, xtol=1e-9)
    K = mass * (2 * np.pi * fn) ** 2
    return make_critically_damped(mass, K, (K / mass) / k_c, k_c)


def discretize(model, sample_rate=INTERNAL_RATE):
    """Bilinear-transform the model into ``(b, a)`` for input in g.

    The analogue prototype is prewarped at the natural frequency.
    """
    fn = model.natural_frequency
    if sample_rate < 20 * fn:
        raise ValueError(
            f"undersampled rate {sample_rate} Hz for natural frequency {fn:.1f} Hz"
        )
    wn = 2 * np.pi * fn
    c = wn / np.tan(wn / (2 * sample_rate))
    gain = model.G * model.k_c * model.M * G_ACCEL
    # H(s) = gain / (M s^2 + D s + K), s -> c (1 - z^-1) / (1 + z^-1)
    a0 = model.M * c**2 + model.D * c + model.K
    a1 = 2 * model.K - 2 * model.M * c**2
    a2 = model.M * c**2 - model.D * c + model.K
    b = np.array([gain, 2 * gain, gain]) / a0
    a = np.array([1.0, a1 / a0, a2 / a0])
    return b, a


def simulate(model, acceleration, fault=HEALTHY, sample_rate=INTERNAL_RATE, return_state=False):
    """Output voltage for an acceleration record (g) sampled at ``sample_rate``.

    Starts from rest.
    """
    b, a = discretize(fault.apply(model), sample_rate)
    sos = np.concatenate([b, a])[None, :]
    y, zf = kernels.sosfilt(sos, np.asarray(acceleration, dtype=float))
    return (y, zf) if return_state else y


def output_per_g(model, f):
    """Analytic complex gain in V per g."""
    return frequency_response(model, f) * G_ACCEL
