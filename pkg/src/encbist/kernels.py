"""Backend selection for the numeric kernels.

The compiled extension is used when it has been built; otherwise the
NumPy/SciPy versions in :mod:`encbist._pykernels` are used. Setting
``ENCBIST_BACKEND=python`` forces the fallback.
"""

import os

import numpy as np

from . import _pykernels

try:
    from . import _kernels as _compiled
except ImportError:  # extension not built
    _compiled = None

BACKENDS = {"python": _pykernels}
if _compiled is not None:
    BACKENDS["cython"] = _compiled

_requested = os.environ.get("ENCBIST_BACKEND", "").strip().lower()
if _requested and _requested not in BACKENDS:
    raise ImportError(f"ENCBIST_BACKEND={_requested!r} is not available; have {sorted(BACKENDS)}")
BACKEND = _requested or ("cython" if _compiled is not None else "python")
_impl = BACKENDS[BACKEND]


# fixed-size section buffers in the compiled cascade
MAX_COMPILED_SECTIONS = 64


def get_backend(name=None):
    """Return the kernel module for ``name`` (default: the active backend)."""
    return BACKENDS[name or BACKEND]


def lfsr_bits(state, tapmask, order, count):
    return _impl.lfsr_bits(int(state), int(tapmask), int(order), int(count))


def lfsr_period(state, tapmask, order, limit):
    return _impl.lfsr_period(int(state), int(tapmask), int(order), int(limit))


def sosfilt(sos, x, zi=None):
    sos = np.ascontiguousarray(sos, dtype=np.float64)
    x = np.ascontiguousarray(x, dtype=np.float64)
    if zi is None:
        zi = np.zeros((sos.shape[0], 2))
    zi = np.ascontiguousarray(zi, dtype=np.float64)
    if sos.shape[0] > MAX_COMPILED_SECTIONS:
        return _pykernels.sosfilt(sos, x, zi)
    return _impl.sosfilt(sos, x, zi)


def quadrature_cov(x, freqs, dt):
    x = np.ascontiguousarray(x, dtype=np.float64)
    freqs = np.ascontiguousarray(np.atleast_1d(freqs), dtype=np.float64)
    return _impl.quadrature_cov(x, freqs, float(dt))
