"""Timing comparison of the compiled kernels against the NumPy fallback.

Runs each hot kernel at a few realistic sizes through both implementations
(the same code paths selected by EULERLAB_PURE) and prints a speedup table.
The two implementations are also cross-checked on every input, so a wrong
fast kernel fails loudly rather than winning the benchmark.

Usage: python benchmarks/bench_kernels.py [--repeats 5] [--quick]
"""

import argparse
import time

import numpy as np

from eulerlab import _kernels_py
from eulerlab._kernels import COMPILED, _carray
from eulerlab import _kernels as dispatch

if COMPILED:
    from eulerlab import _core
else:
    _core = None


def timed(fn, repeats: int) -> float:
    best = np.inf
    for _ in range(repeats):
        start = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - start)
    return best


def bench_gather(n: int, points: int, repeats: int, rng):
    f = rng.standard_normal((n, n))
    xi = rng.uniform(0.0, n, points)
    yi = rng.uniform(0.0, n, points)
    args = (_carray(f), _carray(xi), _carray(yi), 3)
    np.testing.assert_allclose(
        np.asarray(_core.gather_interp(*args)),
        _kernels_py.gather_interp(*args),
        atol=1e-12,
    )
    return (
        f"gather_interp {n}x{n}, {points} pts",
        timed(lambda: _core.gather_interp(*args), repeats),
        timed(lambda: _kernels_py.gather_interp(*args), repeats),
    )


def bench_distance(count: int, n: int, repeats: int, rng):
    stacks = rng.standard_normal((count, 6, n, n))
    shifts = _carray([1, 2, 4, n // 4], dtype=np.int64)
    h = 2.0 * np.pi / n
    args = (_carray(stacks), h, 0.5, shifts)
    np.testing.assert_allclose(
        np.asarray(_core.holder_distance_matrix(*args)),
        _kernels_py.holder_distance_matrix(*args),
        atol=1e-12,
    )
    return (
        f"holder_distance_matrix {count} fields at {n}x{n}",
        timed(lambda: _core.holder_distance_matrix(*args), repeats),
        timed(lambda: _kernels_py.holder_distance_matrix(*args), repeats),
    )


def bench_pack(count: int, repeats: int, rng):
    pts = rng.uniform(0.0, 1.0, (count, 2))
    D = np.abs(pts[:, None, :] - pts[None, :, :]).max(axis=2)
    args = (_carray(D), 0.05)
    np.testing.assert_array_equal(
        np.asarray(_core.greedy_pack(*args)), _kernels_py.greedy_pack(*args)
    )
    return (
        f"greedy_pack {count} points",
        timed(lambda: _core.greedy_pack(*args), repeats),
        timed(lambda: _kernels_py.greedy_pack(*args), repeats),
    )


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeats", type=int, default=5,
                        help="timing repeats; the best run counts")
    parser.add_argument("--quick", action="store_true",
                        help="smaller sizes for a fast smoke run")
    args = parser.parse_args()

    print(f"active dispatch: {dispatch.implementation_name()}")
    if not COMPILED:
        print("compiled extension not importable; nothing to compare")
        return 1

    rng = np.random.default_rng(0)
    if args.quick:
        cases = [
            lambda: bench_gather(64, 20_000, args.repeats, rng),
            lambda: bench_distance(40, 32, args.repeats, rng),
            lambda: bench_pack(400, args.repeats, rng),
        ]
    else:
        cases = [
            lambda: bench_gather(128, 100_000, args.repeats, rng),
            lambda: bench_gather(256, 400_000, args.repeats, rng),
            lambda: bench_distance(120, 32, args.repeats, rng),
            lambda: bench_distance(60, 64, args.repeats, rng),
            lambda: bench_pack(1500, args.repeats, rng),
            lambda: bench_pack(3000, args.repeats, rng),
        ]

    rows = [case() for case in cases]
    width = max(len(r[0]) for r in rows)
    print(f"{'kernel'.ljust(width)}  compiled      numpy    speedup")
    for label, fast, slow in rows:
        print(f"{label.ljust(width)}  {fast * 1e3:7.2f} ms {slow * 1e3:8.2f} ms "
              f"{slow / fast:7.1f}x")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
