"""Covariance/correlation test engine, verdicts and the adaptive code-length policy."""

import enum
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq


class DegenerateSignal(ValueError):
    pass


class Decision(enum.Enum):
    PASS = "Pass"
    FAIL = "Fail"
    NO_DECISION = "NoDecision"

    @property
    def exit_code(self):
        return {Decision.PASS: 0, Decision.FAIL: 1, Decision.NO_DECISION: 2}[self]


@dataclass(frozen=True)
class TestReference:
    cov_ref: float
    cor_ref: float = 1.0
    cov_tolerance: float = 0.08
    cor_threshold_fraction: float = 0.97

    __test__ = False  # not a pytest class

    def __post_init__(self):
        if not 0 < self.cor_threshold_fraction < 1:
            raise ValueError("cor_threshold_fraction must lie in (0, 1)")
        if self.cov_tolerance <= 0:
            raise ValueError("cov_tolerance must be positive")

    @property
    def cor_threshold(self):
        return self.cor_threshold_fraction * self.cor_ref


@dataclass(frozen=True)
class TestVerdict:
    cov: float
    cor: float
    decision: Decision
    k_bound: float

    __test__ = False


def mean(samples):
    x = np.asarray(samples, dtype=float)
    if x.size == 0:
        raise ValueError("mean of empty input")
    return float(x.mean())


def covariance(v_dem, v_code):
    """E(v_dem v_code) - E(v_dem) E(v_code) over one sequence."""
    a = np.asarray(v_dem, dtype=float)
    b = np.asarray(v_code, dtype=float)
    if a.shape != b.shape:
        raise ValueError(f"length mismatch: {a.shape} vs {b.shape}")
    if a.size == 0:
        raise ValueError("empty input")
    # centre first; same value as the raw-moment form but without cancellation
    return float(np.mean((a - a.mean()) * (b - b.mean())))


def correlation(v_dem, v_code):
    var_d = covariance(v_dem, v_dem)
    var_c = covariance(v_code, v_code)
    scale = max(np.max(np.abs(v_dem)), np.max(np.abs(v_code)), 1e-300)
    if var_d <= (1e-12 * scale) ** 2 or var_c <= (1e-12 * scale) ** 2:
        raise DegenerateSignal("degenerate signal: zero variance")
    r = covariance(v_dem, v_code) / np.sqrt(var_d * var_c)
    return float(np.clip(r, -1.0, 1.0))


def correlation_for(k, eps, tone_var=0.5):
    """Cor of a unit-variance code against code + ``k cos(.)``, where the
    cosine has covariance ``eps`` with the code and variance ``tone_var``
    over the window (1/2 once the window spans a few beat cycles)."""
    k = np.asarray(k, dtype=float)
    if np.any(k < 0):
        raise ValueError("k must be nonnegative")
    return (1 + k * eps) / np.sqrt(1 + k**2 * tone_var + 2 * k * eps)


def correlation_model(k, sp):
    """Predicted Cor (relative to the unperturbed reference) for amplitude ratio ``k``.

    Takes ``eps = +|sp|``: the sign that keeps Cor highest, so the
    perturbation is hardest to detect.
    """
    return correlation_for(k, abs(float(sp)))


def k_bound(sp_worst, cor_fraction=0.97, k_max=1e6):
    """Largest ``k`` still compatible with a correlation at ``cor_fraction`` of reference."""
    sp_worst = abs(float(sp_worst))
    f = lambda k: float(correlation_model(k, sp_worst)) - cor_fraction
    if f(k_max) >= 0:
        return np.inf
    return brentq(f, 0.0, k_max, xtol=1e-12)


def accuracy_bound(k, sp_worst):
    """Relative covariance error bound |dCov| / Cov_ref = k * SP."""
    if k < 0 or sp_worst < 0:
        raise ValueError("inputs must be nonnegative")
    return k * sp_worst


def evaluate(v_dem, v_code, ref, sp_worst):
    """Covariance/correlation verdict for one aligned sequence."""
    cov = covariance(v_dem, v_code)
    cor = correlation(v_dem, v_code)
    if cor < ref.cor_threshold:
        return TestVerdict(cov, cor, Decision.NO_DECISION, np.nan)
    ok = abs(cov - ref.cov_ref) <= ref.cov_tolerance * ref.cov_ref
    kb = k_bound(sp_worst, ref.cor_threshold_fraction)
    return TestVerdict(cov, cor, Decision.PASS if ok else Decision.FAIL, kb)


def evaluate_average(pairs, ref, sp_worst):
    """Verdict from Cov/Cor averaged over several sequences ``[(v_dem, v_code), ...]``."""
    pairs = list(pairs)
    if not pairs:
        raise ValueError("no sequences to average")
    cov = float(np.mean([covariance(d, c) for d, c in pairs]))
    cor = float(np.mean([correlation(d, c) for d, c in pairs]))
    if cor < ref.cor_threshold:
        return TestVerdict(cov, cor, Decision.NO_DECISION, np.nan)
    ok = abs(cov - ref.cov_ref) <= ref.cov_tolerance * ref.cov_ref
    kb = k_bound(sp_worst, ref.cor_threshold_fraction)
    return TestVerdict(cov, cor, Decision.PASS if ok else Decision.FAIL, kb)


def adaptive_policy(history, base_order=6, max_order=10):
    """Code order for the next test given ``[(order, Decision), ...]``.

    Lengthen the code by one register stage after a NoDecision, return to
    ``base_order`` once a decision has been made.
    """
    if not history:
        raise ValueError("history is empty")
    order, decision = history[-1]
    if isinstance(decision, TestVerdict):
        decision = decision.decision
    if decision is Decision.NO_DECISION:
        return min(order + 1, max_order)
    return base_order


class AdaptiveCodeLength:
    """Single-owner state machine around :func:`adaptive_policy`."""

    def __init__(self, base_order=6, max_order=10):
        if base_order > max_order:
            raise ValueError("base_order exceeds max_order")
        self.base_order = base_order
        self.max_order = max_order
        self.order = base_order
        self.history = []

    def record(self, decision):
        self.history.append((self.order, decision))
        self.order = adaptive_policy(self.history, self.base_order, self.max_order)
        return self.order
