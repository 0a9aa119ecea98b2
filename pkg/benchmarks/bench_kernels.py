"""Compare the compiled traversal kernels against the pure-NumPy fallback.

Times batch margin prediction and the per-pair Shapley traversal on a
representative workload (23 features, 300 depth-6 trees, 100-point
background), plus one end-to-end explanation. Run with:

    python benchmarks/bench_kernels.py [--trees N] [--features M] [--background B]
"""

import argparse
import time

import numpy as np

from cfshap import Dataset, fit_quantile_transform
from cfshap.kernels import _kernels_py

try:
    from cfshap import _kernels as _kernels_c
except ImportError:
    _kernels_c = None


def _random_ensemble(rng, m, n_trees, depth):
    from cfshap.model import Tree, TreeEnsemble

    trees = []
    for _ in range(n_trees):
        feature, threshold, left, right, value = [], [], [], [], []

        def grow(d):
            idx = len(feature)
            if d == 0 or rng.random() < 0.1:
                feature.append(-1)
                threshold.append(0.0)
                left.append(0)
                right.append(0)
                value.append(rng.normal())
                return idx
            feature.append(int(rng.integers(m)))
            threshold.append(rng.normal())
            left.append(0)
            right.append(0)
            value.append(0.0)
            left[idx] = grow(d - 1)
            right[idx] = grow(d - 1)
            return idx

        grow(depth)
        trees.append(Tree(feature, threshold, left, right, value, n_features=m))
    return TreeEnsemble(trees, base_score=0.0, n_features=m)


def _time(fn, min_duration=0.3):
    fn()  # warm up
    count = 0
    t0 = time.perf_counter()
    while True:
        fn()
        count += 1
        elapsed = time.perf_counter() - t0
        if elapsed > min_duration:
            return elapsed / count


def run(m, n_trees, depth, n_background):
    rng = np.random.default_rng(0)
    ensemble = _random_ensemble(rng, m, n_trees, depth)
    feat, thr, left, right, value, roots = ensemble.packed
    X = rng.normal(size=(2000, m))
    x = np.ascontiguousarray(rng.normal(size=m))
    bg = np.ascontiguousarray(rng.normal(size=(n_background, m)))

    backends = {"python": _kernels_py}
    if _kernels_c is not None:
        backends["compiled"] = _kernels_c
    else:
        print("compiled extension not available; timing the fallback only\n")

    print(
        "workload: %d trees, depth %d, %d features, %d background points, 2000-row batch"
        % (n_trees, depth, m, n_background)
    )
    results = {}
    for name, impl in backends.items():
        t_pred = _time(lambda: impl.predict_matrix(feat, thr, left, right, value, roots, 0.0, X))
        t_shap = _time(
            lambda: impl.shap_pairwise(feat, thr, left, right, value, roots, x, bg, ensemble.max_depth)
        )
        results[name] = (t_pred, t_shap)

    check = {
        name: impl.shap_pairwise(feat, thr, left, right, value, roots, x, bg, ensemble.max_depth)
        for name, impl in backends.items()
    }
    if len(check) == 2:
        dev = float(np.abs(check["python"] - check["compiled"]).max())
        print("backend agreement: max |phi_py - phi_c| = %.2e" % dev)

    print("\n%-10s %18s %22s" % ("backend", "predict (2000 rows)", "shapley (per query)"))
    for name, (t_pred, t_shap) in results.items():
        print("%-10s %15.2f ms %19.2f ms" % (name, t_pred * 1e3, t_shap * 1e3))
    if len(results) == 2:
        sp_pred = results["python"][0] / results["compiled"][0]
        sp_shap = results["python"][1] / results["compiled"][1]
        print("%-10s %15.1fx %19.1fx" % ("speedup", sp_pred, sp_shap))


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--trees", type=int, default=300)
    parser.add_argument("--features", type=int, default=23)
    parser.add_argument("--depth", type=int, default=6)
    parser.add_argument("--background", type=int, default=100)
    args = parser.parse_args()
    run(args.features, args.trees, args.depth, args.background)


if __name__ == "__main__":
    main()
