"""Time forest training and prediction with the compiled and the numpy kernels.

    python benchmarks/bench_kernels.py --rows 5000 --features 20 --trees 10
"""
import argparse
import time

import numpy as np

from pickwhy.forest import ForestParams, train_forest
from pickwhy.kernels import get_backend


def make_data(rows: int, features: int, classes: int, seed: int):
    rng = np.random.default_rng(seed)
    centers = rng.normal(scale=3.0, size=(classes, features))
    y = rng.integers(0, classes, size=rows)
    X = centers[y] + rng.normal(size=(rows, features))
    return X, y


def best_of(fn, repeat: int) -> float:
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--rows", type=int, default=5000)
    ap.add_argument("--features", type=int, default=20)
    ap.add_argument("--classes", type=int, default=7)
    ap.add_argument("--trees", type=int, default=10)
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)

    X, y = make_data(args.rows, args.features, args.classes, args.seed)
    params = ForestParams(n_trees=args.trees)
    backends = {"python": get_backend("python")}
    try:
        backends["cython"] = get_backend("cython")
    except ImportError:
        print("compiled extension not built; timing the numpy backend only")

    models = {}
    print(f"{'backend':8s} {'train_s':>9s} {'predict_s':>10s}")
    for name, impl in backends.items():
        train_s = best_of(lambda: train_forest(X, y, params, args.seed, backend=impl), args.repeat)
        models[name] = train_forest(X, y, params, args.seed, backend=impl)
        pred_s = best_of(lambda: models[name].votes(X, backend=impl), args.repeat)
        print(f"{name:8s} {train_s:9.3f} {pred_s:10.3f}")
    if len(models) == 2:
        same = models["python"].to_dict() == models["cython"].to_dict()
        print(f"identical models: {same}")


if __name__ == "__main__":
    main()
