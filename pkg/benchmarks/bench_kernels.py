"""Wall-clock comparison of the compiled and pure-Python time loops.

Usage: python3 benchmarks/bench_kernels.py [--repeat 3]

Runs the two-stage mixed-feedback scenario at several grid sizes on each
available backend, checks that both produce the same Lyapunov trace, and
prints best-of-``repeat`` timings.
"""
import argparse
import time

import numpy as np

from prodstab.experiments import _two_stage
from prodstab.feedback import Mixed, kappa_bound
from prodstab.simulation import available_backends


def timed(sc, backend, repeat):
    best, tr = float("inf"), None
    for _ in range(repeat):
        t0 = time.perf_counter()
        tr = sc.run(backend)
        best = min(best, time.perf_counter() - t0)
    return best, tr


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--T", type=float, default=30.0)
    args = ap.parse_args()

    backends = available_backends()
    print(f"backends: {', '.join(backends)}")
    print(f"{'N':>6} {'steps':>7} " + " ".join(f"{b + ' [s]':>14}" for b in backends) + "   speedup  max|dV|/V0")
    for N in (50, 100, 200, 400):
        sc = _two_stage(f"bench/N{N}", Mixed(kappa_bound(0.575, 0.5)), eta=0.575, h=0.5 / N, T=args.T)
        results = {b: timed(sc, b, args.repeat) for b in backends}
        times = [results[b][0] for b in backends]
        steps = len(results[backends[0]][1].V) - 1
        line = f"{N:>6} {steps:>7} " + " ".join(f"{t:>14.4f}" for t in times)
        if len(backends) == 2:
            a, b = results["compiled"][1], results["python"][1]
            diff = float(np.max(np.abs(a.V - b.V)) / a.V[0])
            line += f"   {times[1] / times[0]:7.1f}x  {diff:.1e}"
        print(line)


if __name__ == "__main__":
    main()
