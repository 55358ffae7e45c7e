"""Time the compiled and numpy kernel backends on the same inputs.

    python3 benchmarks/bench_kernels.py [--n 100000] [--repeat 5]
"""
import argparse
import timeit

import numpy as np

from gec import kernels


def cases(n, rng):
    r = rng.normal(scale=3.0, size=n)
    g = rng.uniform(0.05, 5.0, n)
    y = np.where(rng.random(n) < 0.5, -1.0, 1.0)
    return {
        "soft_threshold": (r, 1.0 / g),
        "bg_denoise": (r, g, 0.3, 0.0, 1.0),
        "laplace_denoise": (r, g, 1.2),
        "probit_denoise": (r, g, y, 0.7),
        "logcosh_prox": (r, g, 2.0, 0.5, 0.1),
        "probit_prox": (r, g, y, 0.7),
    }


def main():
    p = argparse.ArgumentParser()
    p.add_argument("--n", type=int, default=100_000)
    p.add_argument("--repeat", type=int, default=5)
    args = p.parse_args()
    backends = kernels.available_backends()
    print(f"n = {args.n}, backends: {', '.join(backends)}")
    print(f"{'kernel':<16}" + "".join(f"{b + ' ms':>12}" for b in backends) + f"{'speedup':>10}")
    for name, a in cases(args.n, np.random.default_rng(0)).items():
        fn = getattr(kernels, name)
        ms = []
        for be in backends:
            fn(*a, backend=be)
            t = min(timeit.repeat(lambda: fn(*a, backend=be), number=1, repeat=args.repeat))
            ms.append(1e3 * t)
        speed = f"{ms[0] / ms[1]:>9.1f}x" if len(ms) == 2 else ""
        print(f"{name:<16}" + "".join(f"{m:>12.2f}" for m in ms) + speed)


if __name__ == "__main__":
    main()
