"""Shared builders and independent reference implementations for the tests.

The reference routines here deliberately avoid the package's kernels: they
walk the JSON node lists directly, so they can serve as oracles for the
production code paths.
"""

import json

import numpy as np

from cfshap import parse_model_json


def leaf(value):
    return {"leaf": float(value)}


def split(feat, thr, left, right):
    return {"feat": int(feat), "thr": float(thr), "left": int(left), "right": int(right)}


def build_model(trees, base=0.0, n_features=None, threshold=0.0):
    """TreeEnsemble from nested node-dict lists via the native JSON schema."""
    if n_features is None:
        n_features = 0
        for nodes in trees:
            for nd in nodes:
                if "feat" in nd:
                    n_features = max(n_features, nd["feat"] + 1)
        n_features = max(n_features, 1)
    payload = {
        "n_features": int(n_features),
        "base_score": float(base),
        "threshold": float(threshold),
        "trees": trees,
    }
    return parse_model_json(json.dumps(payload))


def stump(feat, thr, left_value, right_value):
    return [split(feat, thr, 1, 2), leaf(left_value), leaf(right_value)]


def random_tree_nodes(rng, m, max_depth, p_leaf=0.3, leaf_scale=1.0):
    nodes = []

    def grow(depth):
        idx = len(nodes)
        if depth == 0 or rng.random() < p_leaf:
            nodes.append(leaf(rng.normal() * leaf_scale))
            return idx
        nodes.append(None)
        node = split(int(rng.integers(m)), float(rng.normal()), 0, 0)
        node["left"] = grow(depth - 1)
        node["right"] = grow(depth - 1)
        nodes[idx] = node
        return idx

    grow(max_depth)
    return nodes


def random_ensemble(rng, m, n_trees, max_depth, base=0.0, threshold=0.0, p_leaf=0.3,
                    thresholds_from=None):
    trees = []
    for _ in range(n_trees):
        nodes = random_tree_nodes(rng, m, max_depth, p_leaf=p_leaf)
        if thresholds_from is not None:
            for nd in nodes:
                if "feat" in nd:
                    col = thresholds_from[:, nd["feat"]]
                    nd["thr"] = float(rng.choice(col))
        trees.append(nodes)
    return build_model(trees, base=base, n_features=m, threshold=threshold)


def ref_tree_value(nodes, x):
    """Independent tree evaluation on the JSON node list."""
    i = 0
    while "feat" in nodes[i]:
        nd = nodes[i]
        i = nd["left"] if x[nd["feat"]] < nd["thr"] else nd["right"]
    return nodes[i]["leaf"]


def ref_margin(trees, base, x):
    return base + sum(ref_tree_value(nodes, x) for nodes in trees)


def ref_quantile(column_values, v):
    """Count-based empirical CDF oracle."""
    return sum(1 for c in column_values if c <= v) / len(column_values)


def ref_from_quantile(sorted_values, q):
    """Scan oracle: smallest value whose rank reaches q."""
    n = len(sorted_values)
    for i, v in enumerate(sorted_values):
        if (i + 1) / n >= q:
            return v
    return sorted_values[-1]


def write_csv(path, features, labels=None, names=None, label_name="y"):
    m = features.shape[1]
    names = names or ["c%d" % i for i in range(m)]
    header = list(names) + ([label_name] if labels is not None else [])
    lines = [",".join(header)]
    for i in range(features.shape[0]):
        cells = [repr(float(v)) for v in features[i]]
        if labels is not None:
            cells.append(str(int(labels[i])))
        lines.append(",".join(cells))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
