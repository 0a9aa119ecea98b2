"""Additive binary-split tree ensembles: evaluation, JSON (de)serialization,
and decision-threshold selection.

Routing is fixed to "left iff x[feature] < threshold". The margin is the
base score plus the sum of leaf values over all trees; the decision is 1
(the adverse outcome) iff the margin strictly exceeds the threshold.
"""

from __future__ import annotations

import json
import math
import re
import warnings

import numpy as np

from . import kernels
from .errors import (
    DimensionMismatch,
    MissingLabels,
    SchemaError,
    SingleClassDataset,
    UnsupportedFeature,
)

LEAF = -1

_XGB_SPLIT_RE = re.compile(r"^f(\d+)$")


class Tree:
    """One binary decision tree over numeric features, as flat node arrays.

    Node 0 is the root. ``feature[i] == -1`` marks a leaf with payout
    ``value[i]``; split nodes carry a threshold and two child indices.
    Construction validates that the node graph is a single rooted binary
    tree (every node reachable from the root exactly once).
    """

    __slots__ = ("feature", "threshold", "left", "right", "value", "depth")

    def __init__(self, feature, threshold, left, right, value, n_features=None):
        self.feature = np.ascontiguousarray(feature, dtype=np.int32)
        self.threshold = np.ascontiguousarray(threshold, dtype=np.float64)
        self.left = np.ascontiguousarray(left, dtype=np.int32)
        self.right = np.ascontiguousarray(right, dtype=np.int32)
        self.value = np.ascontiguousarray(value, dtype=np.float64)
        self.depth = self._validate(n_features)

    def _validate(self, n_features):
        n = self.feature.size
        shapes = {a.size for a in (self.threshold, self.left, self.right, self.value)}
        if shapes != {n}:
            raise SchemaError("tree node arrays must share one length")
        if n == 0:
            raise SchemaError("tree has no nodes")
        seen = np.zeros(n, dtype=bool)
        max_depth = 0
        stack = [(0, 0)]
        while stack:
            node, depth = stack.pop()
            if node < 0 or node >= n:
                raise SchemaError("child index %d out of range" % node)
            if seen[node]:
                raise SchemaError("node %d reached twice (cycle or shared child)" % node)
            seen[node] = True
            max_depth = max(max_depth, depth)
            f = self.feature[node]
            if f == LEAF:
                if not math.isfinite(self.value[node]):
                    raise SchemaError("leaf %d has non-finite value" % node)
                continue
            if f < 0 or (n_features is not None and f >= n_features):
                raise SchemaError("node %d splits on invalid feature %d" % (node, f))
            if not math.isfinite(self.threshold[node]):
                raise SchemaError("node %d has non-finite threshold" % node)
            stack.append((self.left[node], depth + 1))
            stack.append((self.right[node], depth + 1))
        if not seen.all():
            raise SchemaError("nodes %s unreachable from root" % np.nonzero(~seen)[0].tolist())
        return max_depth

    @property
    def n_nodes(self):
        return self.feature.size

    def max_feature(self):
        splits = self.feature[self.feature >= 0]
        return int(splits.max()) if splits.size else -1


class TreeEnsemble:
    """Additive tree ensemble with a margin-space decision threshold.

    Immutable after construction; prediction is pure and reentrant, so any
    number of callers may evaluate inputs concurrently.
    """

    def __init__(self, trees, base_score=0.0, n_features=None, threshold_t=0.0):
        trees = list(trees)
        if n_features is None:
            n_features = max((t.max_feature() for t in trees), default=-1) + 1
        for i, t in enumerate(trees):
            if t.max_feature() >= n_features:
                raise SchemaError("tree %d splits beyond feature %d" % (i, n_features - 1))
        if not (math.isfinite(base_score) and math.isfinite(threshold_t)):
            raise SchemaError("base score and threshold must be finite")
        self.trees = trees
        self.base_score = float(base_score)
        self.n_features = int(n_features)
        self.threshold_t = float(threshold_t)
        self._packed = None

    @property
    def max_depth(self):
        return max((t.depth for t in self.trees), default=0)

    @property
    def packed(self):
        """Concatenated node arrays with absolute child indices, for the kernels."""
        if self._packed is None:
            feats, thrs, lefts, rights, vals, roots = [], [], [], [], [], []
            offset = 0
            for t in self.trees:
                roots.append(offset)
                feats.append(t.feature)
                thrs.append(t.threshold)
                shift = np.where(t.feature >= 0, offset, 0).astype(np.int32)
                lefts.append(t.left + shift)
                rights.append(t.right + shift)
                vals.append(t.value)
                offset += t.n_nodes
            if offset == 0:
                feats = [np.empty(0, np.int32)]
                thrs = vals = [np.empty(0, np.float64)]
                lefts = rights = [np.empty(0, np.int32)]
            self._packed = (
                np.ascontiguousarray(np.concatenate(feats), dtype=np.int32),
                np.ascontiguousarray(np.concatenate(thrs), dtype=np.float64),
                np.ascontiguousarray(np.concatenate(lefts), dtype=np.int32),
                np.ascontiguousarray(np.concatenate(rights), dtype=np.int32),
                np.ascontiguousarray(np.concatenate(vals), dtype=np.float64),
                np.array(roots, dtype=np.int32),
            )
        return self._packed

    def _check_vector(self, x):
        x = np.ascontiguousarray(x, dtype=np.float64)
        if x.ndim != 1 or x.shape[0] != self.n_features:
            raise DimensionMismatch(
                "expected a vector of %d features" % self.n_features
            )
        return x

    def predict_margin(self, x):
        """Raw model output for one input vector."""
        x = self._check_vector(x)
        return float(self.predict_margin_matrix(x[None, :])[0])

    def predict_margin_matrix(self, X):
        X = np.ascontiguousarray(X, dtype=np.float64)
        if X.ndim != 2 or X.shape[1] != self.n_features:
            raise DimensionMismatch("expected a matrix with %d columns" % self.n_features)
        feat, thr, left, right, value, roots = self.packed
        return kernels.predict_matrix(feat, thr, left, right, value, roots, self.base_score, X)

    def decide(self, x):
        """1 iff the margin strictly exceeds the threshold (adverse outcome)."""
        return int(self.predict_margin(x) > self.threshold_t)

    def decide_matrix(self, X):
        return (self.predict_margin_matrix(X) > self.threshold_t).astype(np.int8)

    def with_threshold(self, threshold_t):
        e = TreeEnsemble(self.trees, self.base_score, self.n_features, threshold_t)
        e._packed = self._packed
        return e


# -- JSON ingestion -----------------------------------------------------------

def parse_model_json(text):
    """Parse a model dump: the native schema (object) or an XGBoost
    ``dump_model`` JSON array (binary:logistic, numeric splits only).

    XGBoost dumps carry no base score or decision threshold; both default
    to 0 and the feature count is inferred from the largest split index.
    """
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError("invalid JSON: %s" % exc, location="$") from None
    if isinstance(obj, list):
        return _parse_xgboost_dump(obj)
    if isinstance(obj, dict):
        return _parse_native(obj)
    raise SchemaError("expected a JSON object or array", location="$")


def _require(obj, key, types, path):
    if key not in obj:
        raise SchemaError("missing key %r" % key, location=path)
    v = obj[key]
    if not isinstance(v, types) or isinstance(v, bool):
        raise SchemaError("key %r has wrong type" % key, location="%s.%s" % (path, key))
    return v


def _parse_native(obj):
    n_features = _require(obj, "n_features", int, "$")
    base_score = float(_require(obj, "base_score", (int, float), "$"))
    threshold = float(_require(obj, "threshold", (int, float), "$"))
    trees_obj = _require(obj, "trees", list, "$")
    if n_features < 1:
        raise SchemaError("n_features must be >= 1", location="$.n_features")
    extra = set(obj) - {"n_features", "base_score", "threshold", "trees"}
    if extra:
        raise SchemaError("unknown keys %s" % sorted(extra), location="$")
    trees = []
    for ti, nodes in enumerate(trees_obj):
        tpath = "trees[%d]" % ti
        if not isinstance(nodes, list) or not nodes:
            raise SchemaError("tree must be a non-empty node list", location=tpath)
        feat = np.full(len(nodes), LEAF, dtype=np.int32)
        thr = np.zeros(len(nodes))
        left = np.zeros(len(nodes), dtype=np.int32)
        right = np.zeros(len(nodes), dtype=np.int32)
        val = np.zeros(len(nodes))
        for ni, nd in enumerate(nodes):
            npath = "%s[%d]" % (tpath, ni)
            if not isinstance(nd, dict):
                raise SchemaError("node must be an object", location=npath)
            if "leaf" in nd:
                if set(nd) != {"leaf"}:
                    raise SchemaError("leaf node has extra keys", location=npath)
                val[ni] = float(_require(nd, "leaf", (int, float), npath))
            else:
                if set(nd) != {"feat", "thr", "left", "right"}:
                    raise SchemaError(
                        "split node must have exactly feat/thr/left/right",
                        location=npath,
                    )
                feat[ni] = _require(nd, "feat", int, npath)
                thr[ni] = float(_require(nd, "thr", (int, float), npath))
                left[ni] = _require(nd, "left", int, npath)
                right[ni] = _require(nd, "right", int, npath)
        try:
            trees.append(Tree(feat, thr, left, right, val, n_features=n_features))
        except SchemaError as exc:
            raise SchemaError(str(exc), location=tpath) from None
    return TreeEnsemble(trees, base_score, n_features, threshold)


def _flatten_xgb_node(nd, records, path):
    if not isinstance(nd, dict):
        raise SchemaError("node must be an object", location=path)
    if "nodeid" not in nd:
        raise SchemaError("missing key 'nodeid'", location=path)
    nid = nd["nodeid"]
    if "leaf" in nd:
        leaf = nd["leaf"]
        if isinstance(leaf, bool) or not isinstance(leaf, (int, float)):
            raise SchemaError("leaf value must be numeric", location=path)
        records[nid] = ("leaf", float(leaf))
        return
    if "categories" in nd or nd.get("decision_type") not in (None, "<"):
        raise UnsupportedFeature("categorical splits are not supported", location=path)
    split = _require(nd, "split", (str, int), path)
    cond = nd.get("split_condition")
    if isinstance(cond, bool) or not isinstance(cond, (int, float)):
        raise UnsupportedFeature(
            "non-numeric split condition (categorical split?)", location=path
        )
    if isinstance(split, str):
        mt = _XGB_SPLIT_RE.match(split)
        if mt is None:
            raise UnsupportedFeature(
                "split %r is not an f<N> feature reference" % split, location=path
            )
        fidx = int(mt.group(1))
    else:
        fidx = split
    yes = _require(nd, "yes", int, path)
    no = _require(nd, "no", int, path)
    records[nid] = ("split", fidx, float(cond), yes, no)
    children = nd.get("children", [])
    for ci, child in enumerate(children):
        _flatten_xgb_node(child, records, "%s.children[%d]" % (path, ci))


def _parse_xgboost_dump(arr):
    trees = []
    top_feature = -1
    for ti, tree_obj in enumerate(arr):
        tpath = "$[%d]" % ti
        records = {}
        _flatten_xgb_node(tree_obj, records, tpath)
        if 0 not in records:
            raise SchemaError("no node with nodeid 0", location=tpath)
        # map nodeids to dense indices by DFS from the root
        order = []
        stack = [0]
        while stack:
            nid = stack.pop()
            if nid not in records:
                raise SchemaError("nodeid %d referenced but absent" % nid, location=tpath)
            order.append(nid)
            rec = records[nid]
            if rec[0] == "split":
                stack.append(rec[4])
                stack.append(rec[3])
        index = {nid: i for i, nid in enumerate(order)}
        n = len(order)
        feat = np.full(n, LEAF, dtype=np.int32)
        thr = np.zeros(n)
        left = np.zeros(n, dtype=np.int32)
        right = np.zeros(n, dtype=np.int32)
        val = np.zeros(n)
        for nid in order:
            i = index[nid]
            rec = records[nid]
            if rec[0] == "leaf":
                val[i] = rec[1]
            else:
                _, fidx, cond, yes, no = rec
                feat[i] = fidx
                thr[i] = cond
                left[i] = index[yes]   # yes-branch means value < condition
                right[i] = index[no]
                top_feature = max(top_feature, fidx)
        try:
            trees.append(Tree(feat, thr, left, right, val))
        except SchemaError as exc:
            raise SchemaError(str(exc), location=tpath) from None
    return TreeEnsemble(trees, base_score=0.0, n_features=top_feature + 1, threshold_t=0.0)


def serialize_model(ensemble):
    """Serialize to the native schema; parse(serialize(.)) is an exact fixpoint."""
    trees = []
    for t in ensemble.trees:
        nodes = []
        for i in range(t.n_nodes):
            if t.feature[i] == LEAF:
                nodes.append({"leaf": float(t.value[i])})
            else:
                nodes.append(
                    {
                        "feat": int(t.feature[i]),
                        "thr": float(t.threshold[i]),
                        "left": int(t.left[i]),
                        "right": int(t.right[i]),
                    }
                )
        trees.append(nodes)
    return json.dumps(
        {
            "n_features": ensemble.n_features,
            "base_score": ensemble.base_score,
            "threshold": ensemble.threshold_t,
            "trees": trees,
        }
    )


# -- decision threshold -------------------------------------------------------

def margin_to_prob(margin):
    """Logistic link, matching binary:logistic ingestion."""
    return 1.0 / (1.0 + math.exp(-margin))


def prob_to_margin(p):
    if not 0.0 < p < 1.0:
        raise ValueError("probability must be in (0, 1)")
    return math.log(p / (1.0 - p))


def select_threshold_roc(ensemble, d, mode="youden"):
    """Pick the margin threshold from the ROC candidate set.

    Candidates are the midpoints between consecutive distinct predicted
    margins; ties break toward the smaller threshold. ``mode="youden"``
    maximizes TPR - FPR; ``mode="literal"`` maximizes TPR + FPR, which is
    monotone in the threshold and therefore degenerates to the smallest
    candidate on most data (kept for comparability).
    """
    if mode not in ("youden", "literal"):
        raise ValueError("mode must be 'youden' or 'literal'")
    if d.labels is None:
        raise MissingLabels("threshold selection requires labels")
    y = d.labels
    pos = int((y == 1).sum())
    neg = int((y == 0).sum())
    if pos == 0 or neg == 0:
        raise SingleClassDataset("threshold selection requires both classes")
    margins = ensemble.predict_margin_matrix(d.features)
    uniq = np.unique(margins)
    if uniq.size == 1:
        warnings.warn("degenerate threshold: all predicted margins are identical")
        return float(uniq[0])
    order = np.argsort(margins, kind="stable")
    sorted_margins = margins[order]
    sorted_y = y[order].astype(np.int64)
    # counts of each class with margin <= every unique value
    bounds = np.searchsorted(sorted_margins, uniq, side="right")
    cum_pos = np.cumsum(sorted_y)
    pos_le = cum_pos[bounds - 1]
    neg_le = bounds - pos_le
    tpr = (pos - pos_le[:-1]) / pos   # predictions at t in (uniq[i], uniq[i+1])
    fpr = (neg - neg_le[:-1]) / neg
    objective = tpr - fpr if mode == "youden" else tpr + fpr
    candidates = (uniq[:-1] + uniq[1:]) / 2.0
    return float(candidates[int(np.argmax(objective))])
