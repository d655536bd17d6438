"""Time the compiled and numpy prefix-sum kernels on window-sized lattices.

Usage: ``python3 benchmarks/bench_kernels.py [--repeat N]``.
"""

import argparse
import timeit

import numpy as np

from peeldyn.kernels import BACKEND, compiled_prefix_sums, numpy_prefix_sums


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    rng = np.random.default_rng(0)
    print(f"active backend: {BACKEND}")
    print(f"{'lattice':>12} {'numpy [s]':>11} {'compiled [s]':>13} {'speed-up':>9} {'max diff':>10}")
    for delta in (4e-3, 2e-3, 1e-3):
        ell = 1.0
        i0 = -int(np.ceil(ell / delta)) - 1
        ni = int(round(0.3 / delta)) - i0 + 2
        nj = int(np.ceil((ell + 0.6) / delta)) + 2
        F = rng.standard_normal((ni, nj))
        t_np = min(timeit.repeat(lambda: numpy_prefix_sums(F, i0, delta), number=1, repeat=args.repeat))
        if compiled_prefix_sums is None:
            print(f"{ni:>5}x{nj:<6} {t_np:>11.4f} {'n/a':>13}")
            continue
        t_c = min(timeit.repeat(lambda: compiled_prefix_sums(F, i0, delta), number=1, repeat=args.repeat))
        diff = max(float(np.max(np.abs(a - b)))
                   for a, b in zip(numpy_prefix_sums(F, i0, delta), compiled_prefix_sums(F, i0, delta)))
        print(f"{ni:>5}x{nj:<6} {t_np:>11.4f} {t_c:>13.4f} {t_np / t_c:>8.1f}x {diff:>10.1e}")


if __name__ == "__main__":
    main()
