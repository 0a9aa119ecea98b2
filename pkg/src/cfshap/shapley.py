"""Interventional Shapley values of the ensemble margin against an explicit
finite background dataset.

Two routes are provided: an exact subset-enumeration oracle (exponential in
the feature count, for verification) and the linear-time per-background-point
tree traversal kernel. Background points carry uniform weight, so duplicates
count multiply.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import comb

import numpy as np

from . import kernels
from .errors import DimensionMismatch, EmptyBackground, TooManyFeatures, UnsupportedFeature

MAX_BRUTE_FORCE_FEATURES = 20
_BRUTE_FORCE_CHUNK = 2048
_MAX_TREE_DEPTH = 170  # factorial weight tables stay finite in float64


@dataclass(frozen=True)
class Attribution:
    """Shapley values plus the expected background output (phi0).

    Satisfies additivity: ``phi.sum() + expected_background_output`` equals
    the margin at the query to within accumulated rounding error.
    """

    phi: np.ndarray
    expected_background_output: float
    query: np.ndarray
    background_size: int

    def to_json(self):
        return {"phi": self.phi.tolist(), "phi0": self.expected_background_output}


def _as_background(ensemble, background):
    bg = np.ascontiguousarray(background, dtype=np.float64)
    if bg.ndim != 2 or bg.shape[1] != ensemble.n_features:
        raise DimensionMismatch("background must be (n, %d)" % ensemble.n_features)
    if bg.shape[0] == 0:
        raise EmptyBackground("background has no points")
    return bg


def characteristic_value(ensemble, x, background, subset):
    """Mean margin over hybrids taking x on ``subset`` and background elsewhere."""
    x = np.asarray(x, dtype=np.float64)
    bg = _as_background(ensemble, background)
    cols = np.fromiter(subset, dtype=np.int64, count=-1)
    hybrid = bg.copy()
    if cols.size:
        hybrid[:, cols] = x[cols]
    return float(ensemble.predict_margin_matrix(hybrid).mean())


def _subset_values(ensemble, x, bg, m):
    """Characteristic value of every feature subset, indexed by bitmask."""
    n_masks = 1 << m
    bits = np.arange(m, dtype=np.int64)
    v = np.empty(n_masks)
    for start in range(0, n_masks, _BRUTE_FORCE_CHUNK):
        masks = np.arange(start, min(start + _BRUTE_FORCE_CHUNK, n_masks), dtype=np.int64)
        take_x = ((masks[:, None] >> bits) & 1).astype(bool)  # (chunk, m)
        hybrids = np.where(take_x[:, None, :], x[None, None, :], bg[None, :, :])
        out = ensemble.predict_margin_matrix(hybrids.reshape(-1, m))
        v[masks] = out.reshape(masks.size, bg.shape[0]).mean(axis=1)
    return v


def shapley_brute_force(ensemble, x, background):
    """Exact Shapley values by full subset enumeration.

    Cost is 2^m * len(background) ensemble evaluations, so the feature count
    is capped at 20. Weights use exact integer binomials.
    """
    x = np.ascontiguousarray(x, dtype=np.float64)
    m = ensemble.n_features
    if x.shape != (m,):
        raise DimensionMismatch("query must have %d features" % m)
    if m > MAX_BRUTE_FORCE_FEATURES:
        raise TooManyFeatures("brute force limited to %d features" % MAX_BRUTE_FORCE_FEATURES)
    bg = _as_background(ensemble, background)
    v = _subset_values(ensemble, x, bg, m)
    masks = np.arange(1 << m, dtype=np.int64)
    popcount = np.zeros(1 << m, dtype=np.int64)
    for i in range(m):
        popcount += (masks >> i) & 1
    weights = np.array([1.0 / (m * comb(m - 1, s)) for s in range(m)])
    phi = np.empty(m)
    for i in range(m):
        without = masks[((masks >> i) & 1) == 0]
        phi[i] = float(weights[popcount[without]] @ (v[without | (1 << i)] - v[without]))
    return Attribution(phi, float(v[0]), x, bg.shape[0])


def shapley_interventional_tree(ensemble, x, background):
    """Shapley values via the per-(tree, background point) traversal kernel.

    Matches ``shapley_brute_force`` to within 1e-9. Linear in tree count and
    background size; accumulation order is fixed (background-major), so the
    result is deterministic for given inputs.
    """
    x = np.ascontiguousarray(x, dtype=np.float64)
    m = ensemble.n_features
    if x.shape != (m,):
        raise DimensionMismatch("query must have %d features" % m)
    if ensemble.max_depth > _MAX_TREE_DEPTH:
        raise UnsupportedFeature("trees deeper than %d are not supported" % _MAX_TREE_DEPTH)
    bg = _as_background(ensemble, background)
    feat, thr, left, right, value, roots = ensemble.packed
    phi = kernels.shap_pairwise(feat, thr, left, right, value, roots, x, bg, ensemble.max_depth)
    phi /= bg.shape[0]
    phi0 = float(ensemble.predict_margin_matrix(bg).mean())
    return Attribution(phi, phi0, x, bg.shape[0])
