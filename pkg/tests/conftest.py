import numpy as np
import pytest

from encbist import kernels


@pytest.fixture(params=sorted(kernels.BACKENDS))
def backend(request):
    return kernels.get_backend(request.param)


def brute_lfsr(order, taps, seed, count):
    """Bit-list LFSR, written independently of the library: cells[0] is cell 1."""
    cells = [(seed >> i) & 1 for i in range(order)]
    out = []
    for _ in range(count):
        out.append(cells[order - 1])
        fb = 0
        for t in taps:
            fb ^= cells[t - 1]
        cells = [fb] + cells[:-1]
    return out


def brute_cov(a, b):
    n = len(a)
    ea = sum(a) / n
    eb = sum(b) / n
    return sum(x * y for x, y in zip(a, b)) / n - ea * eb


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
