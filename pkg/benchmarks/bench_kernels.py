"""Compare the compiled and pure-Python screening kernels.

Usage: python3 benchmarks/bench_kernels.py [--types N] [--repeat R]

Times the three kernels on the 21-type quadratic/uniform oracle instance
(and a smaller one for exhaustive enumeration), checks that both backends
return the same results (floats to 1e-13) and prints the speed-up.
"""

import argparse
import time

import numpy as np

from infomenu import core, kernels, oracle


def _time(fn, repeat):
    best = np.inf
    out = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--types", type=int, default=21)
    p.add_argument("--enum-types", type=int, default=5)
    p.add_argument("--repeat", type=int, default=3)
    args = p.parse_args(argv)

    try:
        fast = kernels.implementation("cython")
    except ImportError:
        print("compiled extension not built; nothing to compare")
        return 1
    slow = kernels.implementation("python")

    V = core.quadratic_value()
    inst = oracle.DiscreteInstance(*oracle.uniform_types(args.types), tuple(oracle.simple_catalog(0.1)), V)
    g, w = inst.gains, inst.weights
    rng = np.random.default_rng(0)
    assigns = [rng.integers(0, g.shape[1], g.shape[0]) for _ in range(200)]
    a0 = np.full(g.shape[0], inst.full_index, dtype=np.int64)

    small = oracle.DiscreteInstance(*oracle.uniform_types(args.enum_types),
                                    tuple(oracle.simple_catalog(0.25)), V)

    cases = [
        ("assignment_prices x200", lambda m: [m.assignment_prices(g, a) for a in assigns]),
        ("move_revenues (all types)", lambda m: [m.move_revenues(g, w, a0, i) for i in range(g.shape[0])]),
        (f"enumerate_best {small.gains.shape[1]}^{small.gains.shape[0]}",
         lambda m: m.enumerate_best(small.gains, small.weights)),
    ]
    print(f"{'kernel':32s} {'python [s]':>12s} {'cython [s]':>12s} {'speed-up':>10s}  agree")
    for name, fn in cases:
        ts, rs = _time(lambda: fn(slow), args.repeat)
        tf, rf = _time(lambda: fn(fast), args.repeat)
        agree = _agree(rs, rf)
        print(f"{name:32s} {ts:12.4f} {tf:12.4f} {ts / tf:10.1f}  {agree}")
    return 0


def _agree(a, b):
    if isinstance(a, list):
        return all(_agree(x, y) for x, y in zip(a, b))
    if isinstance(a, tuple):
        return all(_agree(x, y) for x, y in zip(a, b))
    a, b = np.asarray(a), np.asarray(b)
    if a.dtype.kind in "iub":
        return bool(np.array_equal(a, b))
    return bool(np.allclose(a, b, rtol=0.0, atol=1e-13))


if __name__ == "__main__":
    raise SystemExit(main())
