"""Compare the compiled solver kernels against the numpy fallback.

    python benchmarks/bench_kernels.py [--sizes 5,10,20,40] [--repeat 5]
"""

import argparse
import time

import numpy as np

from tripletlab import _fallback

try:
    from tripletlab import _kernels
except ImportError:  # pragma: no cover
    _kernels = None


def instance(N, seed=0):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(N, 2))
    labels = np.arange(N) % 2
    return X, labels


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sizes", default="5,10,20,40")
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--iters", type=int, default=100)
    args = ap.parse_args()
    backends = [("python", _fallback)] + ([("compiled", _kernels)] if _kernels else [])
    temps, weights = [0.05, 0.01], [2.0, 8.0]
    print(f"{'N':>4} {'backend':>9} {'grad [us]':>11} {'descend [ms]':>13} {'speedup':>8}")
    for N in (int(s) for s in args.sizes.split(",")):
        X, labels = instance(N)
        Y = X + 0.1
        base = None
        for name, mod in backends:
            g = best_of(lambda: mod.smooth_value_grad(X, Y, labels, 0, 0.01, 8.0), args.repeat)
            d = best_of(lambda: mod.descend(X, X.copy(), labels, 0, temps, weights,
                                            args.iters // 2, 0.02, 0.999, 0.9, 0.0),
                        max(1, args.repeat // 2))
            base = base or d
            print(f"{N:>4} {name:>9} {g * 1e6:>11.1f} {d * 1e3:>13.2f} {base / d:>7.1f}x")


if __name__ == "__main__":
    main()
