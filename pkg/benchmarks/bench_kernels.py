"""Compare the numba and NumPy backends of the half-line quadrature kernel.

Usage::

    python3 benchmarks/bench_kernels.py [--sizes 1 10 100 20000] [--repeat 5]

The kernel is the hot loop behind ``pdf(method="quad")`` and the
quadrature marginalization of generators. Both backends are timed on the
same random inputs after a warm-up call (which also triggers numba's JIT
compilation), and their outputs are compared. Times are per batch.

Small batches (scalar density calls, limit probes) are dominated by
NumPy's per-call overhead, where the compiled loop wins clearly; on large
batches NumPy's vectorized transcendental functions keep pace with the
scalar compiled loop.
"""

import argparse
import timeit

import numpy as np

from skewtail import _kernels


def inputs(n, seed=0):
    rng = np.random.default_rng(seed)
    q = rng.uniform(0.0, 20.0, n)
    b = rng.normal(scale=3.0, size=n)
    return q, b


CASES = {
    "normal": (_kernels.EXP_FAMILY, 0.0, 0.0),
    "student-t nu=4, d=2": (_kernels.POWER_FAMILY, 4.0, 3.5),
    "student-t nu=1, d=2": (_kernels.POWER_FAMILY, 1.0, 2.0),
}


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sizes", type=int, nargs="+", default=[1, 10, 100, 20_000])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)
    backends = ["numba", "numpy"] if _kernels.HAS_NUMBA else ["numpy"]
    print(f"best of {args.repeat}; speedup = numpy time / numba time")
    print(f"{'generator':<22}{'n':>7}" + "".join(f"{bk:>13}" for bk in backends) + f"{'speedup':>10}{'max rel diff':>14}")
    for name, (code, shift, expo) in CASES.items():
        for n in args.sizes:
            q, b = inputs(n)
            number = max(1, 2000 // n)
            times, outs = [], []
            for bk in backends:
                _kernels.half_line_ratio(code, shift, expo, q[:10], b[:10], backend=bk)
                run = lambda: _kernels.half_line_ratio(code, shift, expo, q, b, backend=bk)  # noqa: E731
                times.append(min(timeit.repeat(run, number=number, repeat=args.repeat)) / number)
                outs.append(run()[0])
            speed = times[-1] / times[0] if len(times) > 1 else float("nan")
            diff = float(np.max(np.abs(outs[0] - outs[-1]) / np.abs(outs[-1])))
            cells = "".join(f"{t * 1e6:>11.1f}us" for t in times)
            print(f"{name:<22}{n:>7}{cells}{speed:>9.1f}x{diff:>14.2e}")


if __name__ == "__main__":
    main()
