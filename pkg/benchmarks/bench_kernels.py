"""Time the hot kernels under the numba and numpy backends.

    python benchmarks/bench_kernels.py [--repeat 3]

The backend is chosen per call from PRIMERACE_NUMBA, so both run in one process.
Each kernel is warmed up once (numba compilation) before timing, and outputs of
the two backends are compared.
"""
from __future__ import annotations

import argparse
import os
import time

import numpy as np

from primerace import kernels
from primerace._accel import HAVE_NUMBA


def _cases(rng):
    w = np.sort(2.0 / np.sqrt(0.25 + rng.uniform(5, 1000, 4000) ** 2))[::-1].copy()
    offs = np.array([0, 1000, 2000, 3000, 4000], dtype=np.int64)
    amps = rng.uniform(0, 2, size=(256, 4))
    alphas = np.arange(1, 31) / 31.0
    ts = np.linspace(10, 200, 128)
    base = np.array([p for p in range(2, 3200) if all(p % d for d in range(2, int(p**0.5) + 1))], dtype=np.int64)
    return {
        "phase_sums (2000 x 4000)": lambda: kernels.phase_sums(w, offs, 12345, 0, 2000),
        "j0_product (256 x 4000)": lambda: kernels.j0_product(amps, w, offs),
        "j0 (10^6 points)": lambda: kernels.j0(np.linspace(0, 60, 1_000_000)),
        "hurwitz_head (30 x 128 x 400)": lambda: kernels.hurwitz_head(alphas, ts, 400),
        "sieve_segment (10^7)": lambda: kernels.sieve_segment(0, 10_000_000, base),
    }


def _time(fn, repeat):
    fn()
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def _run(flag, fn, repeat):
    os.environ["PRIMERACE_NUMBA"] = flag
    return _time(fn, repeat), fn()


def _diff(a, b):
    if isinstance(a, tuple):
        return max(_diff(x, y) for x, y in zip(a, b))
    a = np.asarray(a)
    b = np.asarray(b)
    if a.dtype == bool:
        return float(np.sum(a != b))
    return float(np.nanmax(np.abs(a - b)))


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("--repeat", type=int, default=3)
    args = p.parse_args(argv)
    rng = np.random.default_rng(1)
    saved = os.environ.get("PRIMERACE_NUMBA")
    print(f"{'kernel':<32}{'numpy [s]':>12}{'numba [s]':>12}{'speedup':>10}{'max diff':>12}")
    try:
        for name, fn in _cases(rng).items():
            t_np, out_np = _run("0", fn, args.repeat)
            if HAVE_NUMBA:
                t_nb, out_nb = _run("1", fn, args.repeat)
                print(f"{name:<32}{t_np:>12.4f}{t_nb:>12.4f}{t_np / t_nb:>10.1f}{_diff(out_np, out_nb):>12.2e}")
            else:
                print(f"{name:<32}{t_np:>12.4f}{'n/a':>12}{'':>10}{'':>12}")
    finally:
        if saved is None:
            os.environ.pop("PRIMERACE_NUMBA", None)
        else:
            os.environ["PRIMERACE_NUMBA"] = saved


if __name__ == "__main__":
    main()
