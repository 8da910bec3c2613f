"""Reference implementations of the compiled kernels (NumPy/SciPy only)."""

import numpy as np
from scipy import signal


def lfsr_bits(state, tapmask, order, count):
    mask = (1 << order) - 1
    out = np.empty(count, dtype=np.uint8)
    s = state
    for i in range(count):
        out[i] = (s >> (order - 1)) & 1
        fb = bin(s & tapmask).count("1") & 1
        s = ((s << 1) | fb) & mask
    return out, s


def lfsr_period(state, tapmask, order, limit):
    mask = (1 << order) - 1
    s = state
    for i in range(1, limit + 1):
        fb = bin(s & tapmask).count("1") & 1
        s = ((s << 1) | fb) & mask
        if s == state:
            return i
    return -1


def sosfilt(sos, x, zi):
    # scipy wants writable coefficient buffers; cached designs are read-only
    y, zf = signal.sosfilt(np.array(sos), x, zi=np.array(zi))
    return np.ascontiguousarray(y), np.ascontiguousarray(zf)


def quadrature_cov(x, freqs, dt, chunk=256):
    x = np.asarray(x, dtype=float)
    freqs = np.asarray(freqs, dtype=float)
    t = np.arange(x.size) * dt
    cc = np.empty(freqs.size)
    ss = np.empty(freqs.size)
    xm = x.mean()
    for start in range(0, freqs.size, chunk):
        ph = 2.0 * np.pi * np.outer(freqs[start:start + chunk], t)
        c = np.cos(ph)
        s = np.sin(ph)
        cc[start:start + chunk] = c @ x / x.size - xm * c.mean(axis=1)
        ss[start:start + chunk] = s @ x / x.size - xm * s.mean(axis=1)
    return cc, ss
