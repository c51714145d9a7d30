"""Time one decentralized round with the compiled and the numpy kernel.

Usage: python3 benchmarks/bench_kernels.py [--sizes 5 10 50] [--repeat 5]

Prints a table of microseconds per round for each available backend on
Cournot instances with m = n_i = 5 and a ring graph, plus the maximum
state difference between backends (they must agree to rounding).
"""
import argparse
import timeit

import numpy as np

from dgne import kernels
from dgne.experiment import ExperimentConfig, build_instance
from dgne.solver import SolverConfig, _AffineKernel, initialize


def bench(N: int, repeat: int, number: int):
    inst = build_instance(ExperimentConfig(N=N, m=5, seed=1))
    cfg = SolverConfig(1e-4, 0.1, 0.1, init_mode="random")
    state, _ = initialize(inst.game, inst.topology, cfg)
    row = {}
    outs = {}
    for name in sorted(kernels.BACKENDS):
        k = _AffineKernel(inst.game, inst.topology,
                          SolverConfig(1e-4, 0.1, 0.1, backend=name))
        outs[name] = k(state)
        t = min(timeit.repeat(lambda: k(state), repeat=repeat, number=number))
        row[name] = 1e6 * t / number
    names = list(outs)
    diff = max((outs[a].max_abs_diff(outs[b]) for a in names for b in names), default=0.0)
    return row, diff


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--sizes", type=int, nargs="+", default=[5, 10, 20, 50])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--number", type=int, default=200)
    args = ap.parse_args()
    backends = sorted(kernels.BACKENDS)
    print(f"selected backend: {kernels.BACKEND}")
    print(f"{'N':>4} " + " ".join(f"{b + ' [us]':>14}" for b in backends)
          + f" {'speedup':>8} {'max diff':>10}")
    for N in args.sizes:
        row, diff = bench(N, args.repeat, args.number)
        speed = row["python"] / row["cython"] if "cython" in row else float("nan")
        print(f"{N:>4} " + " ".join(f"{row[b]:>14.1f}" for b in backends)
              + f" {speed:>8.2f} {diff:>10.2e}")


if __name__ == "__main__":
    np.seterr(all="raise")
    main()
