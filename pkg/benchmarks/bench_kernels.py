#!/usr/bin/env python3
"""Sweep-kernel benchmark: compiled extension vs NumPy fallback.

Times the hot path of the package (one small dense solve per hyperparameter
value) for each family at desk-scale sizes.  Run after installing:

    python benchmarks/bench_kernels.py [--points 100000]
"""

import argparse
import time

import numpy as np

from tunelab import _backend
from tunelab.instances import generate_random, label_matrix


def prepare(seed, n):
    inst = generate_random(seed, n, 2, 0.5, 0.4, planted_structure=True)
    W = inst.dense_adjacency()
    deg = inst.degrees()
    dinv = deg ** -0.5
    S = dinv[:, None] * W * dinv[None, :]
    lap = np.diag(deg) - W
    Y = label_matrix(inst)
    mask = inst.labeled_mask().astype(np.float64)
    return W, deg, S, lap, mask, Y


def time_call(fn, *args, repeats=3):
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--points", type=int, default=100_000,
                        help="parameter sweep length")
    args = parser.parse_args()

    backends = [("pure", _backend.pure)]
    if _backend.compiled is not None:
        backends.append(("compiled", _backend.compiled))
    else:
        print("note: compiled extension not built; benchmarking pure only")

    alphas = np.linspace(1e-6, 1 - 1e-6, args.points)
    lams = np.exp(np.linspace(np.log(1e-2), np.log(1e2), args.points))
    deltas = np.linspace(0.0, 1.0, args.points)

    print(f"{args.points} solves per call, best of 3; times in seconds")
    header = f"{'case':<24}" + "".join(f"{name:>12}" for name, _ in backends)
    if len(backends) == 2:
        header += f"{'speedup':>10}"
    print(header)
    print("-" * len(header))

    for n in (12, 30):
        W, deg, S, lap, mask, Y = prepare(7, n)
        cases = [
            (f"alpha preds n={n}", "alpha_predictions", (S, Y, alphas)),
            (f"lambda preds n={n}", "lambda_predictions", (lap, mask, Y, lams)),
            (f"delta preds n={n}", "delta_predictions", (W, deg, Y, 0.99, deltas)),
            (f"alpha scores n={n}", "alpha_scores", (S, Y, alphas[:10_000])),
        ]
        for label, fname, fargs in cases:
            times = [time_call(getattr(mod, fname), *fargs)
                     for _, mod in backends]
            row = f"{label:<24}" + "".join(f"{t:>12.3f}" for t in times)
            if len(times) == 2:
                row += f"{times[0] / times[1]:>9.1f}x"
            print(row)


if __name__ == "__main__":
    main()
