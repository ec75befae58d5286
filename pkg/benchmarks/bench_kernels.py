"""Time the compiled and pure-Python kernel backends on identical inputs.

Run with ``python3 benchmarks/bench_kernels.py [--repeat N]``.
"""

import argparse
import timeit

import numpy as np

from bmac import kernels


def _cases(rng):
    A = rng.uniform(0.0, 1.0, (16, 16))
    x0 = np.ones(16)
    delta = np.exp(rng.uniform(-3, 3, 8))
    weight = rng.uniform(0.5, 2.0, 8)
    return {
        "power_iteration 16x16": lambda: kernels.power_iteration(A, x0),
        "waterfill_rate n=8": lambda: kernels.waterfill_rate(delta, 4.0),
        "waterfill_budget n=8": lambda: kernels.waterfill_budget(delta, 10.0),
        "waterfill_weighted n=8": lambda: kernels.waterfill_weighted(delta, weight, 5.0),
    }


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--repeat", type=int, default=2000, help="calls per measurement")
    args = p.parse_args()
    backends = kernels.available_backends()
    previous = kernels.get_backend()
    results = {}
    try:
        for name in backends:
            kernels.use_backend(name)
            for label, fn in _cases(np.random.default_rng(0)).items():
                best = min(timeit.repeat(fn, number=args.repeat, repeat=5)) / args.repeat
                results[(label, name)] = best * 1e6
    finally:
        kernels.use_backend(previous)
    labels = list(_cases(np.random.default_rng(0)))
    print(f"{'kernel':<26}" + "".join(f"{b + ' (us)':>16}" for b in backends)
          + ("   speedup" if len(backends) > 1 else ""))
    for label in labels:
        row = f"{label:<26}" + "".join(f"{results[(label, b)]:>16.2f}" for b in backends)
        if "cython" in backends and "python" in backends:
            row += f"{results[(label, 'python')] / results[(label, 'cython')]:>10.1f}x"
        print(row)


if __name__ == "__main__":
    main()
