"""Time the numpy and compiled kernel backends side by side.

Both implementations are imported directly, so one process measures the
pair regardless of which backend the package selected at import.

    python3 benchmarks/bench_kernels.py [--repeat N] [--d WIDTH]
"""

import argparse
import time

import numpy as np

from mvsolver.kernels import pyref

try:
    from mvsolver.kernels import _ckern
except ImportError:
    _ckern = None


def bench(fn, args, repeat):
    fn(*args)  # warm
    best = float("inf")
    for _ in range(repeat):
        start = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - start)
    return best


def cases(d):
    rng = np.random.default_rng(0)
    x = rng.normal(size=(64, d))
    w = rng.normal(size=(d, d))
    b = rng.normal(size=(d,))
    g = rng.normal(size=(64, d))
    sm = rng.normal(size=(64, d))
    xg = rng.normal(size=(1, d))
    hg = rng.normal(size=(1, d))
    mats = [rng.normal(size=(d, d)) for _ in range(6)]
    biases = [rng.normal(size=(d,)) for _ in range(3)]
    gru_args = (xg, hg, mats[0], mats[1], biases[0], mats[2], mats[3],
                biases[1], mats[4], mats[5], biases[2])
    return [
        ("matmul %dx%d" % (64, d), "matmul", (x, w)),
        ("affine", "affine", (x, w, b)),
        ("affine_bwd", "affine_bwd", (x, w, g)),
        ("sigmoid", "sigmoid", (x,)),
        ("tanh", "tanh", (x,)),
        ("softmax_rows", "softmax_rows", (sm,)),
        ("gru_cell", "gru_cell", gru_args),
    ]


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=200)
    ap.add_argument("--d", type=int, default=64)
    args = ap.parse_args()

    if _ckern is None:
        print("compiled backend not built; timing the numpy reference only")
    rows = []
    for label, name, call_args in cases(args.d):
        t_py = bench(getattr(pyref, name), call_args, args.repeat)
        if _ckern is None:
            rows.append((label, t_py, None, None))
            continue
        t_c = bench(getattr(_ckern, name), call_args, args.repeat)
        rows.append((label, t_py, t_c, t_py / t_c))

    print("%-18s %12s %12s %9s" % ("kernel", "python (us)", "compiled (us)",
                                   "speedup"))
    for label, t_py, t_c, ratio in rows:
        if t_c is None:
            print("%-18s %12.1f %12s %9s" % (label, t_py * 1e6, "-", "-"))
        else:
            print("%-18s %12.1f %12.1f %8.1fx"
                  % (label, t_py * 1e6, t_c * 1e6, ratio))


if __name__ == "__main__":
    main()
