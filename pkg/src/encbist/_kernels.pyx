# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled inner loops: LFSR stepping, biquad cascades, quadrature covariances."""

import numpy as np
cimport numpy as cnp
from libc.math cimport cos, sin, M_PI

cnp.import_array()


def lfsr_bits(unsigned long long state, unsigned long long tapmask, int order, Py_ssize_t count):
    """Run a Fibonacci LFSR for ``count`` steps.

    Returns the output bits (register bit ``order``) and the final state.
    """
    cdef cnp.ndarray[cnp.uint8_t, ndim=1] out = np.empty(count, dtype=np.uint8)
    cdef unsigned long long mask = (1ULL << order) - 1ULL
    cdef unsigned long long s = state
    cdef unsigned long long fb
    cdef Py_ssize_t i
    for i in range(count):
        out[i] = <cnp.uint8_t>((s >> (order - 1)) & 1ULL)
        fb = s & tapmask
        fb ^= fb >> 32
        fb ^= fb >> 16
        fb ^= fb >> 8
        fb ^= fb >> 4
        fb ^= fb >> 2
        fb ^= fb >> 1
        s = ((s << 1) | (fb & 1ULL)) & mask
    return out, s


def lfsr_period(unsigned long long state, unsigned long long tapmask, int order, Py_ssize_t limit):
    """Number of steps until ``state`` recurs, or -1 if it does not within ``limit``."""
    cdef unsigned long long mask = (1ULL << order) - 1ULL
    cdef unsigned long long s = state
    cdef unsigned long long fb
    cdef Py_ssize_t i
    for i in range(1, limit + 1):
        fb = s & tapmask
        fb ^= fb >> 32
        fb ^= fb >> 16
        fb ^= fb >> 8
        fb ^= fb >> 4
        fb ^= fb >> 2
        fb ^= fb >> 1
        s = ((s << 1) | (fb & 1ULL)) & mask
        if s == state:
            return i
    return -1


cdef enum:
    MAX_SECTIONS = 64


def sosfilt(const double[:, ::1] sos, const double[::1] x, const double[:, ::1] zi):
    """Second-order-section cascade, transposed direct form II.

    ``sos`` rows are ``b0 b1 b2 a0 a1 a2`` with ``a0 == 1``; ``zi`` has shape
    ``(n_sections, 2)`` and is not modified. Returns ``(y, zf)``.
    """
    cdef Py_ssize_t n = x.shape[0]
    cdef Py_ssize_t ns = sos.shape[0]
    if ns > MAX_SECTIONS:
        raise ValueError(f"at most {MAX_SECTIONS} sections supported")
    cdef cnp.ndarray[cnp.float64_t, ndim=1] y_arr = np.empty(n, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=2] zf_arr = np.empty((ns, 2), dtype=np.float64)
    cdef double[::1] y = y_arr
    cdef double[:, ::1] zf = zf_arr
    cdef double b0[MAX_SECTIONS]
    cdef double b1[MAX_SECTIONS]
    cdef double b2[MAX_SECTIONS]
    cdef double a1[MAX_SECTIONS]
    cdef double a2[MAX_SECTIONS]
    cdef double z0[MAX_SECTIONS]
    cdef double z1[MAX_SECTIONS]
    cdef Py_ssize_t i, j
    cdef double v, w
    for j in range(ns):
        b0[j] = sos[j, 0]
        b1[j] = sos[j, 1]
        b2[j] = sos[j, 2]
        a1[j] = sos[j, 4]
        a2[j] = sos[j, 5]
        z0[j] = zi[j, 0]
        z1[j] = zi[j, 1]
    # sample-major order lets the sections of one sample overlap in the pipeline
    for i in range(n):
        v = x[i]
        for j in range(ns):
            w = b0[j] * v + z0[j]
            z0[j] = b1[j] * v - a1[j] * w + z1[j]
            z1[j] = b2[j] * v - a2[j] * w
            v = w
        y[i] = v
    for j in range(ns):
        zf[j, 0] = z0[j]
        zf[j, 1] = z1[j]
    return y_arr, zf_arr


cdef enum:
    ANCHOR = 256


def quadrature_cov(const double[::1] x, const double[::1] freqs, double dt):
    """Covariance of ``x`` with cos and sin at each frequency (mean-corrected).

    Sample ``n`` sits at time ``n * dt``. The oscillator is advanced by a
    rotation and re-anchored to exact values every few hundred samples.
    """
    cdef Py_ssize_t n = x.shape[0]
    cdef Py_ssize_t nf = freqs.shape[0]
    cdef cnp.ndarray[cnp.float64_t, ndim=1] cc_arr = np.empty(nf, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] ss_arr = np.empty(nf, dtype=np.float64)
    cdef double[::1] cc = cc_arr
    cdef double[::1] ss = ss_arr
    cdef Py_ssize_t i, k
    cdef double xm = 0.0
    cdef double w, c, s, cw, sw, tmp, sxc, sxs, sc, sss
    for i in range(n):
        xm += x[i]
    xm /= n
    for k in range(nf):
        w = 2.0 * M_PI * freqs[k] * dt
        cw = cos(w)
        sw = sin(w)
        sxc = 0.0
        sxs = 0.0
        sc = 0.0
        sss = 0.0
        c = 1.0
        s = 0.0
        for i in range(n):
            if i % ANCHOR == 0:
                c = cos(w * i)
                s = sin(w * i)
            sxc += x[i] * c
            sxs += x[i] * s
            sc += c
            sss += s
            tmp = c * cw - s * sw
            s = s * cw + c * sw
            c = tmp
        cc[k] = sxc / n - xm * (sc / n)
        ss[k] = sxs / n - xm * (sss / n)
    return cc_arr, ss_arr
