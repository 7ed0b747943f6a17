"""Compare the compiled simulation core against the pure-NumPy fallback.

Runs the same swing-equation RK4 workload through both backends and reports
wall-clock timings plus the speedup.  Usage:

    python3 benchmarks/benchmark_backends.py [--repeats 20]
"""

import argparse
import time
from pathlib import Path

import numpy as np

from roagp import _simpure, integrator
from roagp.dynamics import build_smib, load_system

DATA = Path(integrator.__file__).parent / "data"


def _bench(core, args, repeats):
    # warm-up, then best-of-N wall time
    core.simulate_swing(*args)
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        core.simulate_swing(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--repeats", type=int, default=20)
    opts = parser.parse_args()

    cases = [
        ("SMIB, 10k steps", build_smib(), np.array([1.5, -0.8]), 10_000),
        (
            "39-bus reduction, 10k steps",
            load_system(DATA / "ieee39_reduced.json"),
            np.full(18, 0.2),
            10_000,
        ),
    ]

    compiled = integrator._core if integrator._core.COMPILED else None
    if compiled is None:
        print("compiled core unavailable; only the pure backend is timed")

    print(f"{'case':<28} {'pure (ms)':>10} {'compiled (ms)':>14} {'speedup':>8}")
    for name, sys_, x0, n_steps in cases:
        arrays = integrator._swing_arrays(sys_)
        args = (*arrays, x0, 0.01, n_steps, integrator.BLOWUP_NORM)
        t_pure = _bench(_simpure, args, opts.repeats)
        if compiled is None:
            print(f"{name:<28} {t_pure * 1e3:>10.2f} {'-':>14} {'-':>8}")
            continue
        t_comp = _bench(compiled, args, opts.repeats)
        # correctness cross-check while we are here
        s_c, n_c, _ = compiled.simulate_swing(*args)
        s_p, n_p, _ = _simpure.simulate_swing(*args)
        assert n_c == n_p
        assert np.allclose(np.asarray(s_c)[:n_c], np.asarray(s_p)[:n_p], atol=1e-12)
        print(
            f"{name:<28} {t_pure * 1e3:>10.2f} {t_comp * 1e3:>14.2f} "
            f"{t_pure / t_comp:>7.1f}x"
        )


if __name__ == "__main__":
    main()
