"""Compare the compiled and NumPy kernel backends.

    python3 benchmarks/bench_kernels.py --rows 2000 5000 --cols 500 2000

Reports the median wall time of each hot loop per backend and the speedup.
"""
import argparse
import time

import numpy as np

from featgrad import kernels


def _median_time(fn, repeats):
    fn()
    times = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return float(np.median(times))


def bench(n, d, repeats, backends, seed=0):
    rng = np.random.default_rng(seed)
    X = np.ascontiguousarray(rng.normal(size=(n, d)))
    s = rng.uniform(size=d)
    v = rng.normal(size=n)
    w = rng.normal(size=n)
    rows = []
    for name in backends:
        kb = kernels.get_backend(name)
        out = np.zeros(d)
        rows.append((name, {
            "apply": _median_time(lambda: kb.operator_apply(X, s, v), repeats),
            "apply_T": _median_time(lambda: kb.operator_apply_transpose(X, s, v), repeats),
            "bilinear": _median_time(lambda: kb.bilinear_accumulate(X, w, v, out), repeats),
        }))
    return rows


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("--rows", type=int, nargs="+", default=[1000, 5000])
    p.add_argument("--cols", type=int, nargs="+", default=[200, 2000])
    p.add_argument("--repeats", type=int, default=5)
    args = p.parse_args(argv)

    backends = ["numpy"]
    try:
        kernels.get_backend("cython")
        backends.insert(0, "cython")
    except ImportError:
        print("compiled extension not built; timing the NumPy backend only")

    print(f"{'N':>6} {'D':>6} {'backend':>8} {'apply':>10} {'apply_T':>10} {'bilinear':>10}")
    for n in args.rows:
        for d in args.cols:
            rows = bench(n, d, args.repeats, backends)
            for name, t in rows:
                print(f"{n:>6} {d:>6} {name:>8} " + " ".join(f"{t[k] * 1e3:>8.2f}ms" for k in t))
            if len(rows) == 2:
                c, p_ = rows[0][1], rows[1][1]
                print(f"{'':>6} {'':>6} {'speedup':>8} " + " ".join(f"{p_[k] / c[k]:>9.1f}x" for k in c))


if __name__ == "__main__":
    main()
