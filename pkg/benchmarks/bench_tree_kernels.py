"""Compare the numba and numpy CART backends on synthetic corpora.

    python3 benchmarks/bench_tree_kernels.py [--trees 20] [--repeat 3]

Times forest fitting and prediction for Simple and Transfer features and
checks that both backends grow identical trees.
"""
import argparse
import time

import numpy as np

from quicwf import _accel
from quicwf.classify.forest import Forest
from quicwf.features import featurize_dataset
from quicwf.synth import generate_dataset


def best_of(fn, repeat):
    best = np.inf
    out = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def same_forest(a, b):
    return all(np.array_equal(getattr(s, n), getattr(t, n))
               for s, t in zip(a.trees, b.trees)
               for n in ("feature", "threshold", "left", "right", "value"))


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sites", type=int, default=20)
    ap.add_argument("--visits", type=int, default=30)
    ap.add_argument("--k", type=int, default=40)
    ap.add_argument("--trees", type=int, default=20)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()

    if not _accel.HAVE_NUMBA:
        print("numba not importable, nothing to compare")
        return
    traces = generate_dataset(args.sites, args.visits, seed=0)
    # warm the JIT cache so compile time is not counted
    warm = featurize_dataset(traces[:40], "simple", 5)
    Forest.fit(warm.X, warm.y, warm.n_classes, n_estimators=1, backend="numba").votes(warm.X)

    print(f"{'features':9s} {'algo':4s} {'dim':>5s} {'numba fit':>10s} {'numpy fit':>10s} "
          f"{'speedup':>8s} {'numba pred':>10s} {'numpy pred':>10s} identical")
    for fs in ("simple", "transfer"):
        ds = featurize_dataset(traces, fs, args.k)
        for algo, rs in (("RF", False), ("ET", True)):
            res = {}
            for backend in ("numba", "numpy"):
                t_fit, f = best_of(lambda: Forest.fit(
                    ds.X, ds.y, ds.n_classes, n_estimators=args.trees, bootstrap=not rs,
                    random_split=rs, seed=1, backend=backend), args.repeat)
                t_pred, _ = best_of(lambda: f.votes(ds.X), args.repeat)
                res[backend] = (t_fit, t_pred, f)
            nb, npy = res["numba"], res["numpy"]
            print(f"{fs:9s} {algo:4s} {ds.schema.dim:5d} {nb[0]:10.3f} {npy[0]:10.3f} "
                  f"{npy[0] / nb[0]:7.1f}x {nb[1]:10.4f} {npy[1]:10.4f} "
                  f"{same_forest(nb[2], npy[2])}")


if __name__ == "__main__":
    main()
