"""Time the renormalized cocycle kernel on both backends.

    python benchmarks/bench_cocycle.py --steps 20000 --runs 16 --alphas 32

The numba timing excludes the first (compiling) call.  Both backends are run
on identical inputs and their log-norm sums are compared.
"""

import argparse
import time

import numpy as np

from bandunitary import _accel
from bandunitary.kernels import cocycle_batch


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--steps", type=int, default=20_000)
    ap.add_argument("--runs", type=int, default=16)
    ap.add_argument("--alphas", type=int, default=32)
    ap.add_argument("--t", type=float, default=0.5)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()

    rng = np.random.default_rng(0)
    th = rng.uniform(0, 2 * np.pi, (2, args.runs, args.steps))
    x, z = np.exp(1j * th[0]), np.exp(-1j * th[1])
    alphas = np.linspace(0, 2 * np.pi, args.alphas, endpoint=False)
    r = np.sqrt(1 - args.t**2)
    work = args.steps * args.runs * args.alphas
    print(f"{args.runs} runs x {args.alphas} alphas x {args.steps} steps = {work:.3g} matrix steps")

    results = {}
    for name in ("numpy", "numba"):
        if name == "numba" and not _accel.NUMBA_AVAILABLE:
            print("numba   unavailable")
            continue
        call = lambda: cocycle_batch(x, z, alphas, r, args.t, burn=100, backend=name)  # noqa: E731
        if name == "numba":
            t0 = time.perf_counter()
            cocycle_batch(x[:, :10], z[:, :10], alphas[:1], r, args.t, backend=name)
            print(f"numba   compile/load {time.perf_counter() - t0:.2f} s")
        sec, out = best_of(call, args.repeat)
        results[name] = (sec, out)
        print(f"{name:7s} {sec:8.3f} s   {work / sec / 1e6:8.2f} M steps/s")

    if len(results) == 2:
        a, b = results["numpy"][1][1], results["numba"][1][1]
        print(f"speedup {results['numpy'][0] / results['numba'][0]:.1f}x, "
              f"max |log-norm difference| {np.abs(a - b).max():.2e}")


if __name__ == "__main__":
    main()
