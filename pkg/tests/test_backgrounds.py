import numpy as np
import pytest

from cfshap import (
    BackgroundSpec,
    Dataset,
    NeighborPool,
    background_dlab,
    background_dpred,
    background_train,
    fit_quantile_transform,
    knn_counterfactuals,
    project_to_boundary,
    project_to_boundary_batch,
)
from cfshap.errors import NoCounterfactualPool, NoRowsInClass, NotACounterfactual
from helpers import build_model, leaf, split, stump


def test_spec_defaults_match_library_conventions():
    spec = BackgroundSpec(kind="knn")
    assert spec.sample_n == 100 and spec.K == 100 and spec.pool_cap == 10000


def test_spec_validation():
    with pytest.raises(ValueError):
        BackgroundSpec(kind="bogus")
    with pytest.raises(ValueError):
        BackgroundSpec(kind="knn", K=200, pool_cap=100)
    with pytest.raises(ValueError):
        BackgroundSpec(kind="train", sample_n=0)


def test_train_clamps_to_all_rows():
    d = Dataset(np.arange(100.0).reshape(50, 2))
    got = background_train(d, BackgroundSpec(kind="train", sample_n=100))
    assert got.shape == (50, 2)
    np.testing.assert_array_equal(got, d.features)


def test_train_seeded_and_deterministic():
    rng = np.random.default_rng(0)
    d = Dataset(rng.normal(size=(500, 3)))
    a = background_train(d, BackgroundSpec(kind="train", sample_n=40, seed=7))
    b = background_train(d, BackgroundSpec(kind="train", sample_n=40, seed=7))
    c = background_train(d, BackgroundSpec(kind="train", sample_n=40, seed=8))
    np.testing.assert_array_equal(a, b)
    assert not np.array_equal(a, c)


def test_dlab_takes_label_one_rows():
    d = Dataset([[0.0], [1.0], [2.0]], labels=[1, 0, 1])
    got = background_dlab(d, BackgroundSpec(kind="dlab", sample_n=10))
    np.testing.assert_array_equal(np.sort(got, axis=0), [[0.0], [2.0]])


def test_dlab_requires_label_one():
    d = Dataset([[0.0], [1.0]], labels=[0, 0])
    with pytest.raises(NoRowsInClass):
        background_dlab(d, BackgroundSpec(kind="dlab"))


def test_dlab_filters_by_label_not_prediction():
    # model predicts 0 everywhere, yet the label-1 row stays eligible
    e = build_model([], base=-1.0, n_features=1, threshold=0.0)
    d = Dataset([[5.0], [6.0]], labels=[1, 0])
    got = background_dlab(d, BackgroundSpec(kind="dlab"))
    np.testing.assert_array_equal(got, [[5.0]])
    assert e.decide([5.0]) == 0


def test_dpred_returns_opposite_class_rows():
    e = build_model([stump(0, 0.5, -1.0, 1.0)], n_features=1, threshold=0.0)
    d = Dataset([[0.0], [0.2], [0.8], [0.9]])
    got = background_dpred(d, e, np.array([0.7]), BackgroundSpec(kind="dpred", sample_n=10))
    assert e.decide([0.7]) == 1
    assert (e.decide_matrix(got) == 0).all()
    assert got.shape[0] == 2


def test_dpred_one_class_model_raises():
    e = build_model([], base=1.0, n_features=1, threshold=0.0)
    d = Dataset([[0.0], [1.0]])
    with pytest.raises(NoRowsInClass):
        background_dpred(d, e, np.array([0.5]), BackgroundSpec(kind="dpred"))


def _toy_pool():
    # class 1 iff feature0 >= 0.5
    e = build_model([stump(0, 0.5, -1.0, 1.0)], n_features=2, threshold=0.0)
    rows = np.array(
        [
            [0.10, 0.10],
            [0.20, 0.90],
            [0.30, 0.30],
            [0.40, 0.15],
            [0.45, 0.50],
            [0.60, 0.80],
            [0.70, 0.20],
            [0.80, 0.60],
            [0.90, 0.40],
            [0.95, 0.70],
        ]
    )
    d = Dataset(rows)
    return e, d, fit_quantile_transform(d)


def test_knn_matches_exhaustive_sort():
    e, d, qt = _toy_pool()
    x = np.array([0.9, 0.2])
    spec = BackgroundSpec(kind="knn", K=3, seed=0, pool_cap=100)
    got = knn_counterfactuals(d, qt, e, x, spec)
    # oracle: full sort of quantile-L1 distances over opposite-class rows
    qx = qt.to_quantile(x)
    opp = [i for i in range(d.n_rows) if e.decide(d.features[i]) != e.decide(x)]
    dists = sorted(
        (np.abs(qt.to_quantile(d.features[i]) - qx).sum(), i) for i in opp
    )
    want = d.features[[i for _, i in dists[:3]]]
    np.testing.assert_array_equal(got, want)


def test_knn_all_returned_flip_the_decision():
    e, d, qt = _toy_pool()
    for x in d.features:
        got = knn_counterfactuals(d, qt, e, x, BackgroundSpec(kind="knn", K=4, seed=0))
        assert (e.decide_matrix(got) != e.decide(x)).all()


def test_knn_distances_non_decreasing():
    e, d, qt = _toy_pool()
    x = np.array([0.55, 0.5])
    got = knn_counterfactuals(d, qt, e, x, BackgroundSpec(kind="knn", K=5, seed=0))
    qx = qt.to_quantile(x)
    dists = [np.abs(qt.to_quantile(r) - qx).sum() for r in got]
    assert all(a <= b for a, b in zip(dists, dists[1:]))


def test_knn_zero_distance_rows_come_first():
    # rows at 0.25 share the query's rank (no training mass in (0.25, 0.26])
    # yet sit on the other side of the split: quantile distance 0
    e = build_model([stump(0, 0.255, -1.0, 1.0)], n_features=1, threshold=0.0)
    rows = np.array([[0.1], [0.25], [0.25], [0.9], [0.7]])
    d = Dataset(rows)
    qt = fit_quantile_transform(d)
    x = np.array([0.26])
    assert e.decide(x) == 1
    assert qt.to_quantile(x)[0] == qt.to_quantile([0.25])[0]
    got = knn_counterfactuals(d, qt, e, x, BackgroundSpec(kind="knn", K=2, seed=0))
    np.testing.assert_array_equal(got, [[0.25], [0.25]])
    got3 = knn_counterfactuals(d, qt, e, x, BackgroundSpec(kind="knn", K=3, seed=0))
    np.testing.assert_array_equal(got3, [[0.25], [0.25], [0.1]])


def test_knn_ties_break_by_row_index():
    e = build_model([stump(0, 0.5, -1.0, 1.0)], n_features=2, threshold=0.0)
    rows = np.array([[0.9, 0.0], [0.1, 0.0], [0.1, 0.0], [0.1, 0.0]])
    d = Dataset(rows)
    qt = fit_quantile_transform(d)
    got = knn_counterfactuals(d, qt, e, rows[0], BackgroundSpec(kind="knn", K=2, seed=0))
    pool = NeighborPool(d, qt, e, pool_cap=100, seed=0)
    # equidistant rows 1..3: indices 1 and 2 must win
    np.testing.assert_array_equal(got, rows[[1, 2]])
    assert pool.row_indices.tolist() == [0, 1, 2, 3]


def test_knn_fewer_than_k_and_empty_pool():
    e, d, qt = _toy_pool()
    got = knn_counterfactuals(d, qt, e, np.array([0.9, 0.2]), BackgroundSpec(kind="knn", K=100, seed=0))
    assert got.shape[0] == 5  # only 5 opposite-class rows exist
    one_class = build_model([], base=1.0, n_features=2, threshold=0.0)
    with pytest.raises(NoCounterfactualPool):
        knn_counterfactuals(d, qt, one_class, np.array([0.9, 0.2]), BackgroundSpec(kind="knn", K=3))


def test_pool_cap_restricts_candidates():
    rng = np.random.default_rng(1)
    e = build_model([stump(0, 0.0, -1.0, 1.0)], n_features=1, threshold=0.0)
    d = Dataset(rng.normal(size=(200, 1)))
    qt = fit_quantile_transform(d)
    pool = NeighborPool(d, qt, e, pool_cap=10, seed=3)
    assert pool.rows.shape[0] == 10
    x = np.array([2.0])
    got = pool.counterfactual_neighbors(qt, e, x, K=50)
    assert got.shape[0] == (pool.predictions == 0).sum()


def test_pool_is_deterministic():
    rng = np.random.default_rng(2)
    e = build_model([stump(0, 0.0, -1.0, 1.0)], n_features=1, threshold=0.0)
    d = Dataset(rng.normal(size=(100, 1)))
    qt = fit_quantile_transform(d)
    p1 = NeighborPool(d, qt, e, pool_cap=20, seed=5)
    p2 = NeighborPool(d, qt, e, pool_cap=20, seed=5)
    np.testing.assert_array_equal(p1.row_indices, p2.row_indices)


def test_projection_single_crossing_stump():
    e = build_model([stump(0, 0.5, -1.0, 1.0)], n_features=2, threshold=0.0)
    x = np.array([0.9, 0.3])
    nbr = np.array([0.1, 0.3])
    p = project_to_boundary(e, x, nbr)
    assert e.decide(p) != e.decide(x)
    # lands just past the stump threshold along the segment
    assert p[0] == pytest.approx(0.5, abs=1e-9)
    assert p[0] < 0.5
    assert p[1] == pytest.approx(0.3)


def test_projection_multiple_crossings_takes_smallest():
    # margin along feature 0: +1 below 2, -1 in [2,4), +1 in [4,6), -1 above 6
    nodes = [
        split(0, 4.0, 1, 2),
        split(0, 2.0, 3, 4),
        split(0, 6.0, 5, 6),
        leaf(1.0),
        leaf(-1.0),
        leaf(1.0),
        leaf(-1.0),
    ]
    e = build_model([nodes], n_features=1, threshold=0.0)
    x = np.array([1.0])      # class 1
    nbr = np.array([7.0])    # class 0, but the segment flips first at 2.0
    p = project_to_boundary(e, x, nbr)
    assert e.decide(p) == 0
    assert p[0] == pytest.approx(2.0, abs=1e-6)
    # dense-scan oracle at 1e-4 resolution agrees on the first flip
    alphas = np.arange(1, 6001) * 1e-4
    pts = x[None, :] + alphas[:, None] * (nbr - x)[None, :]
    first = alphas[np.nonzero(e.decide_matrix(pts) == 0)[0][0]]
    assert abs((p[0] - x[0]) / (nbr[0] - x[0]) - first) <= 1e-4


def test_projection_batch_matches_single():
    rng = np.random.default_rng(3)
    trees = [stump(i % 3, float(rng.normal()), float(rng.normal()), float(rng.normal())) for i in range(9)]
    e = build_model(trees, n_features=3, threshold=0.0)
    X = rng.normal(size=(300, 3))
    cls = e.decide_matrix(X)
    adverse = X[cls == 1]
    accepted = X[cls == 0]
    x = adverse[0]
    nbrs = accepted[:8]
    batch = project_to_boundary_batch(e, x, nbrs)
    for j in range(8):
        np.testing.assert_array_equal(batch[j], project_to_boundary(e, x, nbrs[j]))
        assert e.decide(batch[j]) != e.decide(x)


def test_projection_requires_counterfactual():
    e = build_model([stump(0, 0.5, -1.0, 1.0)], n_features=1, threshold=0.0)
    with pytest.raises(NotACounterfactual):
        project_to_boundary(e, np.array([0.9]), np.array([0.8]))
