"""Throughput comparison of the stepping kernels (compiled vs pure Python).

Runs the method-of-steps RK4 loop on the three builtin models for a
fixed workload and reports steps/second per backend.  Usage:

    python benchmarks/bench_kernels.py [--units 200] [--m 128]
"""

import argparse
import time

import numpy as np

from ddebranch import models
from ddebranch._kernels import reference

try:
    from ddebranch._kernels import _speedups
except ImportError:
    _speedups = None


def run(impl, model, r, units, m):
    ops, iargs, consts = model.kernel_args()
    n_steps = units * m
    y = np.zeros(m + n_steps + 1)
    d = np.zeros(m + n_steps + 1)
    y[: m + 1] = 0.1
    (u0, u1), (v0, v1) = model.domain
    t0 = time.perf_counter()
    status, last, viol = impl.simulate_scalar(
        ops, iargs, consts, r, y, d, m, n_steps, 1e6, u0, u1, v0, v1
    )
    elapsed = time.perf_counter() - t0
    assert status == 0, f"unexpected kernel status {status}"
    return n_steps / elapsed, y


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--units", type=int, default=200, help="time units to integrate")
    parser.add_argument("--m", type=int, default=128, help="steps per unit delay")
    args = parser.parse_args()

    cases = [
        ("hutchinson-log", 2.0),
        ("enharmonic", 1.2),
        ("qrt-doublewell", 1.55),
    ]
    print(f"workload: {args.units} units, m = {args.m} ({args.units * args.m} steps)")
    print(f"{'model':18s} {'python steps/s':>16s} {'compiled steps/s':>18s} {'speedup':>9s}")
    for name, r in cases:
        model = models.builtin(name)
        py_rate, y_py = run(reference, model, r, args.units, args.m)
        if _speedups is None:
            print(f"{name:18s} {py_rate:16.0f} {'unavailable':>18s} {'-':>9s}")
            continue
        c_rate, y_c = run(_speedups, model, r, args.units, args.m)
        identical = np.array_equal(y_py, y_c)
        print(
            f"{name:18s} {py_rate:16.0f} {c_rate:18.0f} {c_rate / py_rate:8.1f}x"
            + ("" if identical else "  (outputs differ!)")
        )


if __name__ == "__main__":
    main()
