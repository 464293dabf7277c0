"""Compare the compiled and pure-numpy iteration kernels.

Runs the two solvers' full iteration loops on seeded random instances and
prints per-iteration wall time for each backend plus the speedup.  The
compiled rows are skipped when the extension is not built.

Usage: python benchmarks/bench_backends.py [--repeats N]
"""

import argparse
import time

import numpy as np

from jedmimo._kernels import _iter_np

try:
    from jedmimo._kernels import _iter_cy
except ImportError:
    _iter_cy = None

CASES = (
    # (n_rx, n_tx, t_pilot, t_data, iterations)
    (16, 16, 16, 512, 20),
    (32, 32, 32, 512, 20),
    (64, 80, 80, 512, 20),
)


def _instance(n, k, t_t, t_d, rng):
    h = np.sqrt(0.5 / k) * (rng.standard_normal((n, k))
                            + 1j * rng.standard_normal((n, k)))
    x = rng.choice([-1.0, 1.0], size=(k, t_t + t_d)) \
        + 1j * rng.choice([-1.0, 1.0], size=(k, t_t + t_d))
    y = h @ x + 0.05 * (rng.standard_normal((n, t_t + t_d))
                        + 1j * rng.standard_normal((n, t_t + t_d)))
    h0 = h + 0.1 * (rng.standard_normal((n, k))
                    + 1j * rng.standard_normal((n, k)))
    return y[:, :t_t], y[:, t_t:], x[:, :t_t], h0


def _time(fn, args, repeats):
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--repeats", type=int, default=5)
    args = parser.parse_args()

    rng = np.random.default_rng(0)
    print(f"{'case':>16s} {'kernel':>6s} {'numpy ms/it':>12s} "
          f"{'cython ms/it':>13s} {'speedup':>8s}")
    for n, k, t_t, t_d, iters in CASES:
        y_t, y_d, x_t, h0 = _instance(n, k, t_t, t_d, rng)
        admm_args = (y_t, y_d, x_t, h0, 0.25, 0.05, iters, 1.0)
        am_args = (y_t, y_d, x_t, h0, 0.05, iters, 1.0)
        for kernel, np_fn, cy_fn in (
                ("admm", _iter_np.admm_iterations,
                 _iter_cy.admm_iterations if _iter_cy else None),
                ("am", _iter_np.am_iterations,
                 _iter_cy.am_iterations if _iter_cy else None)):
            fn_args = admm_args if kernel == "admm" else am_args
            np_fn(*fn_args)  # warm up
            t_np = _time(np_fn, fn_args, args.repeats) / iters
            if cy_fn is None:
                print(f"{n:>5d}x{k:<4d}T={t_d:<4d} {kernel:>6s} "
                      f"{1e3 * t_np:>12.3f} {'unbuilt':>13s} {'-':>8s}")
                continue
            cy_fn(*fn_args)
            t_cy = _time(cy_fn, fn_args, args.repeats) / iters
            print(f"{n:>5d}x{k:<4d}T={t_d:<4d} {kernel:>6s} "
                  f"{1e3 * t_np:>12.3f} {1e3 * t_cy:>13.3f} "
                  f"{t_np / t_cy:>7.2f}x")


if __name__ == "__main__":
    main()
