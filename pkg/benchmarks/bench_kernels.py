"""Timing harness: numba-jitted kernels against their pure-numpy bodies.

Every hot kernel is written so the identical function body runs either
JIT-compiled or as plain numpy (see polyc.accel). This script times both
paths at representative batch sizes and prints one row per kernel. Run
with POLYC_NUMBA=0 to confirm the fallback path is what gets timed as
"numpy" here.

Usage: python benchmarks/bench_kernels.py [--repeats 5]
"""

import argparse
import time

import numpy as np

from polyc.accel import NUMBA_ENABLED
from polyc.envs.path_tracking import path_tracking_step_batch
from polyc.envs.pendulum import pendulum_step_batch
from polyc.envs.quadrotor import quadrotor_step_batch
from polyc.kernels import adam_step, mlp_forward, mlp_backward, param_count

BATCH_NET = 4096
BATCH_ENV = 65536  # the certification engine's chunk size


def bench(fn, args, repeats):
    fn(*args)  # warm up (JIT compile / cache touch)
    best = np.inf
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def cases(rng):
    widths = np.array([12, 64, 64, 1], dtype=np.int64)
    params = rng.standard_normal(param_count(widths)) * 0.1
    x = rng.standard_normal((BATCH_NET, 12))
    gout = rng.standard_normal((BATCH_NET, 1))
    yield "mlp_forward", mlp_forward, (params, widths, x, 0)
    yield "mlp_backward", mlp_backward, (params, widths, x, gout, 0)

    m = np.zeros_like(params)
    v = np.zeros_like(params)
    grad = rng.standard_normal(params.size)
    yield "adam_step", adam_step, (params.copy(), grad, m, v, 3, 1e-3,
                                   0.9, 0.999, 1e-8)

    s2 = rng.uniform(-1.0, 1.0, (BATCH_ENV, 2))
    a1 = rng.uniform(-2.0, 2.0, (BATCH_ENV, 1))
    out2 = np.empty_like(s2)
    yield "pendulum_step_batch", pendulum_step_batch, (s2, a1, 0.05, out2)

    s12 = rng.uniform(-0.5, 0.5, (BATCH_ENV, 12))
    a4 = rng.uniform(0.0, 800.0, (BATCH_ENV, 4))
    out12 = np.empty_like(s12)
    yield "quadrotor_step_batch", quadrotor_step_batch, (s12, a4, 0.02, out12)

    s4 = rng.uniform(-1.0, 1.0, (BATCH_ENV, 4))
    s4[:, 2] += 5.0
    s4[:, 3] = 5.0
    a2 = rng.uniform(-1.0, 1.0, (BATCH_ENV, 2))
    kap = np.zeros(BATCH_ENV)
    out4 = np.empty_like(s4)
    yield ("path_tracking_step_batch", path_tracking_step_batch,
           (s4, a2, kap, 0.02, out4))


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--repeats", type=int, default=5)
    args = parser.parse_args()

    if not NUMBA_ENABLED:
        print("POLYC_NUMBA=0: numba path disabled, timing the numpy body "
              "against itself")
    rng = np.random.default_rng(0)
    print(f"{'kernel':<26} {'jit ms':>10} {'numpy ms':>10} {'speedup':>8}")
    for name, fn, call_args in cases(rng):
        t_jit = bench(fn, call_args, args.repeats)
        t_py = bench(fn.py_func, call_args, args.repeats)
        print(f"{name:<26} {t_jit * 1e3:>10.3f} {t_py * 1e3:>10.3f} "
              f"{t_py / t_jit:>8.2f}x")


if __name__ == "__main__":
    main()
