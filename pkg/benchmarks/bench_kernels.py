"""Compare the compiled and pure-Python kernel backends.

    python benchmarks/bench_kernels.py [--repeat 5]

Prints one row per kernel with the best-of-N wall time for each available
backend and the speed-up of the compiled one.
"""

import argparse
import timeit

import numpy as np
from scipy import signal

from encbist import kernels


def cases():
    rng = np.random.default_rng(0)
    sos = np.ascontiguousarray(signal.butter(5, 150.0, fs=64000.0, output="sos"))
    zi = np.zeros((sos.shape[0], 2))
    x = rng.standard_normal(80640)  # two 63-chip sequences at 64 kHz
    code = rng.choice([-1.0, 1.0], 504)
    freqs = np.arange(0.0, 100.0, 0.02)
    return {
        "lfsr_bits (order 16, full period)": lambda b: b.lfsr_bits(1, (1 << 15) | (1 << 14) | (1 << 12) | (1 << 3), 16, 2**16 - 1),
        "lfsr_period (order 16)": lambda b: b.lfsr_period(1, (1 << 15) | (1 << 14) | (1 << 12) | (1 << 3), 16, 2**16),
        "sosfilt (order 5, 80640 samples)": lambda b: b.sosfilt(sos, x, zi),
        "quadrature_cov (504 samples x 5000 f)": lambda b: b.quadrature_cov(code, freqs, 1 / 800.0),
    }


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args(argv)

    names = sorted(kernels.BACKENDS)
    print(f"default backend: {kernels.BACKEND}")
    header = f"{'kernel':40s}" + "".join(f"{n:>12s}" for n in names) + f"{'speed-up':>10s}"
    print(header)
    print("-" * len(header))
    for label, fn in cases().items():
        times = {}
        for name in names:
            backend = kernels.get_backend(name)
            fn(backend)  # warm-up
            times[name] = min(timeit.repeat(lambda: fn(backend), number=1, repeat=args.repeat))
        row = f"{label:40s}" + "".join(f"{times[n] * 1e3:10.2f}ms" for n in names)
        if "cython" in times:
            row += f"{times['python'] / times['cython']:9.1f}x"
        print(row)


if __name__ == "__main__":
    main()
