"""Times every step kernel on both backends.

Usage:  python benchmarks/bench_kernels.py [dims ...]

Reports ns/element for the compiled Cython kernels and the numpy fallback,
plus an end-to-end run comparison.  The compiled kernels mostly pay off at
small dimensions, where a full optimizer step is a handful of numpy calls
each costing more in dispatch than in arithmetic.
"""

import sys
import timeit

import numpy as np

from accelsgd import _kernels_py
from accelsgd.rng import stream

try:
    from accelsgd import _kernels
except ImportError:
    _kernels = None


def make_state(dim):
    rng = stream(0, 0, "bench")
    return {
        "w": rng.standard_normal(dim),
        "m": 0.1 * rng.standard_normal(dim),
        "m2": 0.1 * rng.standard_normal(dim),
        "v": 0.01 * np.abs(rng.standard_normal(dim)),
        "g": rng.standard_normal(dim),
        "gp": rng.standard_normal(dim),
        "z": rng.standard_normal(dim),
        "x": rng.standard_normal(dim),
        "y": rng.standard_normal(dim),
        "wavg": rng.standard_normal(dim),
        "cbuf": np.empty(dim),
    }


CASES = [
    ("accel_sgd_step", ("w", "m", "g"), (0.95, 0.01, 0.002)),
    ("schedule_free_sgd_step", ("z", "x", "y", "g"), (0.05, 0.01, 0.0)),
    ("adamw_step", ("w", "m", "v", "g"),
     (1e-3, 0.9, 0.999, 1e-8, 0.01, 0.5, 0.05)),
    ("laprop_step", ("w", "m", "v", "g"),
     (1e-3, 0.9, 0.999, 1e-8, 0.01, 0.5, 0.05)),
    ("lion_step", ("w", "m", "g"), (1e-3, 0.9, 0.99, 0.1)),
    ("mars_step", ("w", "m", "v", "gp", "g", "cbuf"),
     (1e-3, 0.9, 0.999, 0.03, 1e-8, 0.0, False, 0.5, 0.05)),
    ("ademamix_step", ("w", "m", "m2", "v", "g"),
     (1e-3, 0.9, 0.999, 0.9999, 8.0, 1e-8, 0.0, 0.5, 0.05)),
    ("simplified_ademamix_step", ("w", "m", "v", "g"),
     (1e-5, 0.999, 0.999, 20.0, 1e-8, 0.0, 1.0)),
    ("accel_adam_avg_step", ("w", "m", "v", "wavg", "g"),
     (1e-3, 0.9, 0.999, 0.9, 0.99, 1e-8, 0.0, 1.0)),
]


def bench_kernels(dims):
    print(f"{'kernel':<26}", end="")
    for dim in dims:
        print(f"{f'd={dim}':>24}", end="")
    print()
    print(f"{'':<26}" + f"{'numpy / cython (us)':>24}" * len(dims))
    for name, arrays, scalars in CASES:
        print(f"{name:<26}", end="")
        for dim in dims:
            state = make_state(dim)
            args = [state[a] for a in arrays]
            reps = max(200, min(20_000, 2_000_000 // dim))
            t_py = timeit.timeit(
                lambda: getattr(_kernels_py, name)(*args, *scalars),
                number=reps) / reps * 1e6
            if _kernels is None:
                print(f"{t_py:>12.2f} {'n/a':>11}", end="")
                continue
            t_cy = timeit.timeit(
                lambda: getattr(_kernels, name)(*args, *scalars),
                number=reps) / reps * 1e6
            print(f"{t_py:>12.2f} {t_cy:>11.2f}", end="")
        print()


def bench_run(dim=100, steps=20_000):
    """End-to-end harness run, compiled vs fallback backend."""
    import os
    import subprocess
    code = (
        "import time\n"
        "from accelsgd import harness, OptimizerConfig, BACKEND\n"
        "from accelsgd.problems import noisy_least_squares\n"
        f"prob = noisy_least_squares(n=120, d={dim}, batch_size=1, seed=7)\n"
        "spec = harness.RunSpec(problem=prob,\n"
        "    optimizer=OptimizerConfig(algorithm='ademamix', lr=1e-3,\n"
        "                              beta3=0.999, alpha=8.0),\n"
        f"    steps={steps}, seed=0, eval_every={steps})\n"
        "t0 = time.perf_counter(); harness.run(spec)\n"
        "print(f'{BACKEND}: {time.perf_counter() - t0:.2f}s')\n")
    print(f"\nend-to-end ademamix run (d={dim}, {steps} steps):")
    for backend in ("cython", "numpy"):
        env = dict(os.environ, ACCELSGD_BACKEND=backend)
        out = subprocess.run([sys.executable, "-c", code], env=env,
                             capture_output=True, text=True)
        print(" ", out.stdout.strip() or out.stderr.strip())


if __name__ == "__main__":
    dims = [int(a) for a in sys.argv[1:]] or [10, 100, 10_000]
    if _kernels is None:
        print("compiled kernels not available; timing the fallback only")
    bench_kernels(dims)
    bench_run()
