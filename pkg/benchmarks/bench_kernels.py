#!/usr/bin/env python3
"""Side-by-side timing of the numpy and numba kernel backends.

Each kernel runs on the same inputs under both backends; outputs are checked
for exact agreement before timings are reported.

    python benchmarks/bench_kernels.py [--repeat 5]
"""

import argparse
import time

import numpy as np

from dplang import _kernels
from dplang.distribution import named_distribution
from dplang.identification import IdConfig, run_id_trials
from dplang.instances import named_instance
from dplang.mechanisms import PrivacyParams


def _inputs(rng):
    u = rng.random((512, 20000))
    cdf = named_distribution("ipp-d").cdf
    codes = _kernels.cdf_codes(u, cdf)
    counts = rng.integers(0, 50, size=(4096, 8))
    member = rng.random((4, 8)) < 0.5
    scores = -rng.random((100000, 12)) * 50
    su = rng.random(100000)
    return {
        "cdf_codes": lambda: _kernels.cdf_codes(u, cdf),
        "geometric_codes": lambda: _kernels.geometric_codes(u),
        "count_codes": lambda: _kernels.count_codes(codes, 2),
        "prefix_min_counts": lambda: _kernels.prefix_min_counts(counts, member, 2000),
        "em_select": lambda: _kernels.em_select(scores, 0.5, su),
    }


def _time(fn, repeat):
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def _end_to_end():
    inst = named_instance("ipp")
    cfg = IdConfig(12, PrivacyParams(1.0), "pure")
    return lambda: run_id_trials(inst, cfg, 20000, 2000, 0)


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args(argv)
    backends = _kernels.available_backends()
    if "numba" not in backends:
        print("numba unavailable; only the numpy backend can be timed")
    kernels = _inputs(np.random.default_rng(7))
    kernels["identify_2000_trials"] = _end_to_end()
    print(f"{'kernel':>22}  " + "  ".join(f"{b + ' (ms)':>12}" for b in backends) + f"  {'speedup':>8}  {'agree':>5}")
    print("-" * (44 + 14 * len(backends)))
    for name, fn in kernels.items():
        times, outs = {}, {}
        for b in backends:
            with _kernels.using_backend(b):
                fn()  # warm up (JIT compile on first call)
                times[b], outs[b] = _time(fn, args.repeat)
        agree = all(np.array_equal(outs[backends[0]], outs[b]) for b in backends)
        speed = times["numpy"] / times["numba"] if "numba" in times else float("nan")
        cols = "  ".join(f"{times[b] * 1e3:>12.2f}" for b in backends)
        print(f"{name:>22}  {cols}  {speed:>7.1f}x  {'ok' if agree else 'FAIL':>5}")


if __name__ == "__main__":
    main()
