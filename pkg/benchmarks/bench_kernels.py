"""Compare the numba kernels against the pure-numpy fallbacks.

Usage: python benchmarks/bench_kernels.py [--sizes 10000 100000 1000000]

The two backends are exact and bit-identical (the test suite asserts it);
this script only measures speed.  Set FAIRSHIFT_DISABLE_NUMBA=1 to confirm
the package runs on the fallback alone.
"""

import argparse
import time

import numpy as np

from fairshift import _kernels as K


def timeit(fn, *args, repeat=5):
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def curve_pair(rng, g):
    """Step-curve values resembling censoring gaps: same-signed, drifting."""
    theta = np.sort(rng.uniform(0.0, 1.0, g))
    da = -0.05 - 0.05 * np.abs(np.sin(theta * 9)) + rng.normal(0, 0.004, g)
    db = da - 0.08 + 0.06 * (theta - 0.5) ** 2 + rng.normal(0, 0.004, g)
    return theta, da, db


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--sizes", type=int, nargs="+",
                        default=[10_000, 100_000, 1_000_000])
    args = parser.parse_args()

    if K.active_backend() != "numba":
        print("numba backend unavailable or disabled; timing numpy only\n")

    rng = np.random.default_rng(0)
    rows = []
    for g in args.sizes:
        idx = np.arange(g, dtype=np.uint64)
        theta, da, db = curve_pair(rng, g)

        if K.active_backend() == "numba":  # trigger compilation outside timing
            K.counter_uniforms_nb(1, idx[:16], 0)
            K.widest_strict_window_nb(theta[:16], da[:16], db[:16])
            K.widest_ordered_window_nb(theta[:16], da[:16], db[:16])

        for name, np_fn, nb_fn, fargs in (
            ("uniforms", K.counter_uniforms_np, K.counter_uniforms_nb,
             (7, idx, 0)),
            ("strict-window", K.widest_strict_window_np,
             K.widest_strict_window_nb, (theta, da, db)),
            ("ordered-window", K.widest_ordered_window_np,
             K.widest_ordered_window_nb, (theta, da, db)),
        ):
            t_np = timeit(np_fn, *fargs)
            if K.active_backend() == "numba":
                t_nb = timeit(nb_fn, *fargs)
                rows.append((name, g, t_np, t_nb, t_np / t_nb))
            else:
                rows.append((name, g, t_np, None, None))

    header = f"{'kernel':<16}{'n':>10}{'numpy [ms]':>14}{'numba [ms]':>14}{'speedup':>10}"
    print(header)
    print("-" * len(header))
    for name, g, t_np, t_nb, ratio in rows:
        nb = f"{t_nb * 1e3:14.2f}" if t_nb is not None else f"{'-':>14}"
        sp = f"{ratio:10.1f}" if ratio is not None else f"{'-':>10}"
        print(f"{name:<16}{g:>10}{t_np * 1e3:14.2f}{nb}{sp}")


if __name__ == "__main__":
    main()
