"""Background-set construction.

Three input-invariant baselines (training sample, label-1 rows,
differently-predicted rows), counterfactual K-nearest-neighbour sets over
quantile space, and the boundary-projected variant of the latter. All
operations are deterministic given (data, seed); neighbour ties break by
dataset row index.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (
    EmptyDataset,
    NoCounterfactualPool,
    NoRowsInClass,
    NotACounterfactual,
)

KINDS = ("train", "dlab", "dpred", "knn", "knn-proj")
_PROJECTION_BISECT_ITERS = 60


@dataclass(frozen=True)
class BackgroundSpec:
    """How to build the background for an explanation.

    ``sample_n`` applies to the input-invariant kinds, ``K`` and ``pool_cap``
    to the neighbour kinds. The same spec always yields the same background.
    """

    kind: str
    sample_n: int = 100
    K: int = 100
    seed: int = 0
    pool_cap: int = 10000

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError("kind must be one of %s" % (KINDS,))
        if self.sample_n < 1:
            raise ValueError("sample_n must be >= 1")
        if self.K < 1:
            raise ValueError("K must be >= 1")
        if self.pool_cap < self.K:
            raise ValueError("pool_cap must be >= K")


def _seeded_sample(rows, sample_n, seed):
    n = rows.shape[0]
    if n <= sample_n:
        return rows.copy()
    idx = np.random.default_rng(seed).choice(n, size=sample_n, replace=False)
    idx.sort()
    return rows[idx]


def background_train(d, spec):
    """Uniform seeded sample of training rows (all rows if fewer than asked)."""
    if d.n_rows == 0:
        raise EmptyDataset("cannot sample from an empty dataset")
    return _seeded_sample(d.features, spec.sample_n, spec.seed)


def background_dlab(d, spec):
    """Seeded sample among the adverse-labelled rows (label == 1).

    Selection is by label, not prediction: rows the model would classify
    differently remain eligible.
    """
    if d.labels is None or not (d.labels == 1).any():
        raise NoRowsInClass("no rows with label 1")
    return _seeded_sample(d.features[d.labels == 1], spec.sample_n, spec.seed)


def background_dpred(d, ensemble, x, spec, predictions=None):
    """Seeded sample among rows predicted with the class opposite the query's."""
    if d.n_rows == 0:
        raise EmptyDataset("cannot sample from an empty dataset")
    if predictions is None:
        predictions = ensemble.decide_matrix(d.features)
    rows = d.features[predictions != ensemble.decide(x)]
    if rows.shape[0] == 0:
        raise NoRowsInClass("no rows predicted with the opposite class")
    return _seeded_sample(rows, spec.sample_n, spec.seed)


class NeighborPool:
    """Seeded, capped subsample of training rows with cached quantiles and
    predictions.

    Drawn once per run and shared by every query in a batch, so results do
    not depend on the full dataset size. Also serves as the reference pool
    for plausibility scoring.
    """

    def __init__(self, d, qt, ensemble, pool_cap=10000, seed=0):
        if d.n_rows == 0:
            raise EmptyDataset("cannot build a pool from an empty dataset")
        n = d.n_rows
        if n <= pool_cap:
            idx = np.arange(n)
        else:
            idx = np.random.default_rng(seed).choice(n, size=pool_cap, replace=False)
            idx.sort()
        self.row_indices = idx
        self.rows = d.features[idx]
        self.quantiles = qt.to_quantile_matrix(self.rows)
        self.predictions = ensemble.decide_matrix(self.rows)
        # pre-split by predicted class so per-query filtering is a lookup
        self._by_class = {
            c: np.nonzero(self.predictions == c)[0] for c in (0, 1)
        }

    def counterfactual_neighbors(self, qt, ensemble, x, K):
        """Rows of the K nearest opposite-class pool points, by quantile L1.

        Returns fewer than K rows when the opposite-class pool is smaller;
        distance ties break by dataset row index.
        """
        cls = ensemble.decide(x)
        cand = self._by_class[1 - cls]
        if cand.size == 0:
            raise NoCounterfactualPool("pool has no rows of the opposite class")
        qx = qt.to_quantile(x)
        dists = np.abs(self.quantiles[cand] - qx).sum(axis=1)
        order = np.lexsort((self.row_indices[cand], dists))
        take = order[: min(K, cand.size)]
        return self.rows[cand[take]]


def knn_counterfactuals(d, qt, ensemble, x, spec, pool=None):
    """K nearest differently-predicted training rows in quantile Manhattan
    distance, searched within a seeded pool of at most ``pool_cap`` rows."""
    if pool is None:
        pool = NeighborPool(d, qt, ensemble, pool_cap=spec.pool_cap, seed=spec.seed)
    return pool.counterfactual_neighbors(qt, ensemble, x, spec.K)


def _segment_breakpoints(ensemble, x, delta):
    """Ascending alphas in (0, 1] where x + alpha*delta crosses any split
    threshold; the margin is constant between consecutive values."""
    feat, thr, _, _, _, _ = ensemble.packed
    splits = feat >= 0
    f = feat[splits]
    moving = delta[f] != 0
    alphas = (thr[splits][moving] - x[f[moving]]) / delta[f[moving]]
    alphas = alphas[(alphas > 0.0) & (alphas <= 1.0)]
    return np.unique(alphas)


def project_to_boundary_batch(ensemble, x, nbrs):
    """Project counterfactual points onto the decision boundary along the
    line to the query.

    For each neighbour, the smallest alpha in (0, 1] flipping the decision
    of ``x + alpha*(nbr - x)`` is located exactly: candidate alphas come from
    the split thresholds crossed by the segment (the margin is piecewise
    constant in alpha), breakpoints and interval midpoints are tested in
    order, and a 60-iteration bisection refines the open-interval case. The
    returned points retain the neighbour's class.
    """
    x = np.asarray(x, dtype=np.float64)
    nbrs = np.atleast_2d(np.asarray(nbrs, dtype=np.float64))
    cls = ensemble.decide(x)
    if (ensemble.decide_matrix(nbrs) == cls).any():
        raise NotACounterfactual("neighbour predicted with the query's class")

    probes = []     # (neighbour index, alpha, is_breakpoint)
    for j in range(nbrs.shape[0]):
        delta = nbrs[j] - x
        brks = _segment_breakpoints(ensemble, x, delta)
        prev = 0.0
        for a in brks:
            probes.append((j, (prev + a) / 2.0, False))
            probes.append((j, a, True))
            prev = a
        if prev < 1.0:
            probes.append((j, (prev + 1.0) / 2.0, False))
        probes.append((j, 1.0, False))

    owners = np.array([p[0] for p in probes])
    alphas = np.array([p[1] for p in probes])
    is_brk = np.array([p[2] for p in probes])
    pts = x[None, :] + alphas[:, None] * (nbrs[owners] - x[None, :])
    # the endpoint is the neighbour itself; recomputing it via x + 1.0*delta
    # can land on the other side of a split threshold by rounding
    at_end = alphas == 1.0
    pts[at_end] = nbrs[owners[at_end]]
    flipped = ensemble.decide_matrix(pts) != cls

    out = np.empty_like(nbrs)
    lo = np.zeros(nbrs.shape[0])
    hi = np.full(nbrs.shape[0], np.nan)
    for j in range(nbrs.shape[0]):
        mine = owners == j
        flips = np.nonzero(flipped[mine])[0]
        first = flips[0]   # alpha=1 is the neighbour itself, always flipped
        my_alphas = alphas[mine]
        if is_brk[mine][first]:
            out[j] = x + my_alphas[first] * (nbrs[j] - x)
            continue
        hi[j] = my_alphas[first]
        lo[j] = my_alphas[first - 1] if first > 0 else 0.0
    need = np.nonzero(~np.isnan(hi))[0]
    if need.size:
        deltas = nbrs[need] - x
        for _ in range(_PROJECTION_BISECT_ITERS):
            mid = 0.5 * (lo[need] + hi[need])
            mid_flipped = ensemble.decide_matrix(x[None, :] + mid[:, None] * deltas) != cls
            hi[need[mid_flipped]] = mid[mid_flipped]
            lo[need[~mid_flipped]] = mid[~mid_flipped]
        out[need] = x[None, :] + hi[need][:, None] * deltas
        # rounding near alpha = 1 can leave the recomputed point unflipped;
        # the neighbour itself is then the projection
        stuck = need[ensemble.decide_matrix(out[need]) == cls]
        out[stuck] = nbrs[stuck]
    return out


def project_to_boundary(ensemble, x, nbr):
    """Single-point boundary projection; see ``project_to_boundary_batch``."""
    return project_to_boundary_batch(ensemble, x, np.asarray(nbr)[None, :])[0]
