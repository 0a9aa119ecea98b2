"""Counterfactual and baseline explanations: Shapley values against the
chosen background plus a per-feature direction-of-change trend.

Neighbour-based backgrounds carry a trend derived from the background itself
(sign of background mean minus query); input-invariant baselines fall back to
the global label-correlation trend. Either way the trend and the Shapley
values are computed from the same, single background construction.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import backgrounds
from .dataset import pearson_global_trends
from .errors import EmptyBackground
from .shapley import shapley_interventional_tree


@dataclass(frozen=True)
class Explanation:
    """(phi, tau) pair with provenance of the background used."""

    phi: np.ndarray
    tau: np.ndarray
    phi0: float
    background_kind: str
    background_points_used: int
    trend_source: str  # "derived" or "global"

    def to_json(self):
        return {
            "phi": self.phi.tolist(),
            "tau": self.tau.tolist(),
            "phi0": self.phi0,
            "background": {
                "kind": self.background_kind,
                "n": self.background_points_used,
            },
            "trend_source": self.trend_source,
        }


def derived_trends(x, background):
    """Per-feature sign of (background mean - query value); exact zero -> 0."""
    bg = np.atleast_2d(np.asarray(background, dtype=np.float64))
    if bg.shape[0] == 0:
        raise EmptyBackground("cannot derive trends from an empty background")
    x = np.asarray(x, dtype=np.float64)
    return np.sign(bg.mean(axis=0) - x).astype(np.int8)


def _build_background(x, ensemble, dataset, qt, spec, pool, predictions):
    if spec.kind == "train":
        return backgrounds.background_train(dataset, spec)
    if spec.kind == "dlab":
        return backgrounds.background_dlab(dataset, spec)
    if spec.kind == "dpred":
        return backgrounds.background_dpred(dataset, ensemble, x, spec, predictions)
    nbrs = backgrounds.knn_counterfactuals(dataset, qt, ensemble, x, spec, pool=pool)
    if spec.kind == "knn-proj":
        return backgrounds.project_to_boundary_batch(ensemble, x, nbrs)
    return nbrs


def explain(x, ensemble, dataset, qt, spec, *, pool=None, global_trends=None, predictions=None):
    """Explain one query under a background spec.

    Shapley values come from the traversal kernel; the trend is derived from
    the same background for neighbour kinds and replaced by the global
    label-correlation trend for the input-invariant baselines. A neighbour
    background smaller than K (scarce opposite-class pool) is used as-is and
    its actual size recorded.
    """
    x = np.ascontiguousarray(x, dtype=np.float64)
    bg = _build_background(x, ensemble, dataset, qt, spec, pool, predictions)
    attribution = shapley_interventional_tree(ensemble, x, bg)
    if spec.kind in ("knn", "knn-proj"):
        tau = derived_trends(x, bg)
        source = "derived"
    else:
        tau = global_trends if global_trends is not None else pearson_global_trends(dataset)
        source = "global"
    return Explanation(
        phi=attribution.phi,
        tau=np.asarray(tau, dtype=np.int8),
        phi0=attribution.expected_background_output,
        background_kind=spec.kind,
        background_points_used=bg.shape[0],
        trend_source=source,
    )


class Explainer:
    """Binds a model, training data, and background spec for batch use.

    Precomputes whatever the spec allows to be shared across queries: the
    neighbour pool, the global trend vector, cached training predictions,
    and the input-invariant backgrounds themselves (per query class for the
    differently-predicted kind).
    """

    def __init__(self, ensemble, dataset, qt, spec, pool=None):
        self.ensemble = ensemble
        self.dataset = dataset
        self.qt = qt
        self.spec = spec
        self.pool = pool
        self.global_trends = None
        self.predictions = None
        self._fixed_background = None
        self._dpred_by_class = {}
        if spec.kind in ("knn", "knn-proj"):
            if pool is None:
                self.pool = backgrounds.NeighborPool(
                    dataset, qt, ensemble, pool_cap=spec.pool_cap, seed=spec.seed
                )
        else:
            self.global_trends = pearson_global_trends(dataset)
            if spec.kind == "train":
                self._fixed_background = backgrounds.background_train(dataset, spec)
            elif spec.kind == "dlab":
                self._fixed_background = backgrounds.background_dlab(dataset, spec)
            else:
                self.predictions = ensemble.decide_matrix(dataset.features)

    def _background_for(self, x):
        if self._fixed_background is not None:
            return self._fixed_background
        if self.spec.kind == "dpred":
            cls = self.ensemble.decide(x)
            if cls not in self._dpred_by_class:
                self._dpred_by_class[cls] = backgrounds.background_dpred(
                    self.dataset, self.ensemble, x, self.spec, self.predictions
                )
            return self._dpred_by_class[cls]
        nbrs = self.pool.counterfactual_neighbors(self.qt, self.ensemble, x, self.spec.K)
        if self.spec.kind == "knn-proj":
            return backgrounds.project_to_boundary_batch(self.ensemble, x, nbrs)
        return nbrs

    def explain(self, x):
        x = np.ascontiguousarray(x, dtype=np.float64)
        bg = self._background_for(x)
        attribution = shapley_interventional_tree(self.ensemble, x, bg)
        if self.spec.kind in ("knn", "knn-proj"):
            tau = derived_trends(x, bg)
            source = "derived"
        else:
            tau = self.global_trends
            source = "global"
        return Explanation(
            phi=attribution.phi,
            tau=np.asarray(tau, dtype=np.int8),
            phi0=attribution.expected_background_output,
            background_kind=self.spec.kind,
            background_points_used=bg.shape[0],
            trend_source=source,
        )
