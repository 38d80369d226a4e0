"""Compare the compiled and pure-Python kernel backends.

Checks that both backends produce bit-identical trajectories, then times the
MLE-greedy loop over a few horizons.

    python3 benchmarks/bench_kernels.py --n 1000 10000 100000 --repeat 3
"""
import argparse
import time

import numpy as np

from markdown_pricing import demand
from markdown_pricing.kernels import available_backends
from markdown_pricing.noise import NoiseModel, derive_stream


def run(mod, n, seed, noise):
    fam = demand.LINEAR
    rng = derive_stream(seed, 0, 0)
    a = float(fam.sample_theta(rng)[0])
    innov = noise.innovations(rng, n)
    prices = np.empty(n)
    demands = np.empty(n)
    inc = mod.mle_greedy_linear(a, fam.param_lo[0], fam.param_hi[0], fam.price_domain[0], fam.price_domain[1],
                                fam.scale, noise.code, noise.sigma, innov, prices, demands)
    return prices, demands, inc


def best_time(fn, repeat):
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, nargs="+", default=[1_000, 10_000, 100_000])
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)

    backends = available_backends()
    if "cython" not in backends:
        print("compiled backend not built; only timing the python backend")
    noise = NoiseModel("gaussian_clipped", 0.1)

    # parity first: any mismatch makes the timings meaningless
    ref = run(backends["python"], 5_000, args.seed, noise)
    for name, mod in backends.items():
        out = run(mod, 5_000, args.seed, noise)
        same = np.array_equal(out[0], ref[0]) and np.array_equal(out[1], ref[1]) and out[2] == ref[2]
        print(f"parity {name:7s} vs python: {'identical' if same else 'MISMATCH'}")

    print(f"{'n':>9s} " + " ".join(f"{name:>12s}" for name in backends) + "   speedup")
    for n in args.n:
        times = {name: best_time(lambda m=mod: run(m, n, args.seed, noise), args.repeat)
                 for name, mod in backends.items()}
        row = f"{n:9d} " + " ".join(f"{times[name]*1e3:10.2f}ms" for name in backends)
        if "cython" in times:
            row += f"   {times['python'] / times['cython']:6.1f}x"
        print(row)


if __name__ == "__main__":
    main()
