"""Time the evidence kernels on the numba and pure-numpy paths.

    python benchmarks/bench_kernels.py [--depth 11] [--repeat 3]

Both backends run on the same simulated count tree; the script prints the
best wall time of each and the largest log Bayes factor difference.
"""

import argparse
import time

import numpy as np

from andova import _accel
from andova.evidence import compute_evidence
from andova.partition import bin_counts, build_ndp
from andova.simulation import OMEGA, ScenarioSpec, generate


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--depth", type=int, default=11)
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--n", type=int, default=500)
    args = ap.parse_args(argv)

    data = generate(ScenarioSpec("local_shift", n=args.n, seed=1))
    counts = bin_counts(build_ndp(*OMEGA, args.depth), data)
    print(f"depth {args.depth}: {counts.n.shape[0]} windows, {counts.n.shape[1]} replicates")

    results = {}
    backends = ["numpy"] + (["numba"] if _accel.HAVE_NUMBA else [])
    if "numba" in backends:
        compute_evidence(counts, backend="numba")  # compile outside the timing
    for b in backends:
        dt, ev = best_of(lambda: compute_evidence(counts, backend=b), args.repeat)
        results[b] = ev
        print(f"{b:>6}: {dt:8.3f} s")
    if len(results) == 2:
        diff = np.abs(results["numba"].log_BF - results["numpy"].log_BF).max()
        print(f"max |log BF difference| = {diff:.2e}")


if __name__ == "__main__":
    main()
