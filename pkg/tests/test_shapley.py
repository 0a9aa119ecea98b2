import json

import numpy as np
import pytest

from cfshap import (
    characteristic_value,
    serialize_model,
    shapley_brute_force,
    shapley_interventional_tree,
)
from cfshap.errors import EmptyBackground, TooManyFeatures
from helpers import build_model, random_ensemble, stump


def test_characteristic_extremes():
    rng = np.random.default_rng(0)
    e = random_ensemble(rng, m=3, n_trees=8, max_depth=3)
    x = rng.normal(size=3)
    bg = rng.normal(size=(7, 3))
    assert characteristic_value(e, x, bg, {0, 1, 2}) == pytest.approx(
        e.predict_margin(x), abs=1e-12
    )
    assert characteristic_value(e, x, bg, set()) == pytest.approx(
        e.predict_margin_matrix(bg).mean(), abs=1e-12
    )


def test_characteristic_stump_hybrids():
    e = build_model([stump(0, 5.0, -1.0, 1.0)], n_features=1)
    bg = np.array([[0.0], [10.0]])
    # S = {0}: both hybrids take x=5 -> margin +1; S = {}: mean of -1 and +1
    assert characteristic_value(e, np.array([5.0]), bg, {0}) == 1.0
    assert characteristic_value(e, np.array([5.0]), bg, set()) == 0.0


def test_brute_force_additive_model_closed_form():
    # additive margin g0(x0) + g1(x1): phi_i = mean_b [g_i(x_i) - g_i(b_i)]
    e = build_model([stump(0, 1.0, -2.0, 3.0), stump(1, 0.0, 1.0, -1.0)], n_features=2)

    def g0(v):
        return -2.0 if v < 1.0 else 3.0

    def g1(v):
        return 1.0 if v < 0.0 else -1.0

    rng = np.random.default_rng(1)
    x = np.array([2.0, -1.0])
    bg = rng.normal(size=(6, 2))
    att = shapley_brute_force(e, x, bg)
    expect0 = g0(x[0]) - np.mean([g0(b) for b in bg[:, 0]])
    expect1 = g1(x[1]) - np.mean([g1(b) for b in bg[:, 1]])
    assert att.phi[0] == pytest.approx(expect0, abs=1e-12)
    assert att.phi[1] == pytest.approx(expect1, abs=1e-12)


def test_dummy_feature_is_exact_zero(kernel_backend):
    rng = np.random.default_rng(2)
    e = build_model(
        [stump(0, 0.0, -1.0, 1.0), stump(2, 0.5, 2.0, -2.0)], n_features=4
    )
    x = rng.normal(size=4)
    bg = rng.normal(size=(5, 4))
    for att in (shapley_brute_force(e, x, bg), shapley_interventional_tree(e, x, bg)):
        assert att.phi[1] == 0.0
        assert att.phi[3] == 0.0


def test_symmetric_features_get_equal_phi(kernel_backend):
    # mirrored pair of interacting trees: swapping features 0 and 1 fixes f
    t_a = [
        {"feat": 0, "thr": 0.0, "left": 1, "right": 2},
        {"leaf": -1.0},
        {"feat": 1, "thr": 1.0, "left": 3, "right": 4},
        {"leaf": 0.5},
        {"leaf": 2.0},
    ]
    t_b = [
        {"feat": 1, "thr": 0.0, "left": 1, "right": 2},
        {"leaf": -1.0},
        {"feat": 0, "thr": 1.0, "left": 3, "right": 4},
        {"leaf": 0.5},
        {"leaf": 2.0},
    ]
    e = build_model([t_a, t_b], n_features=2)
    x = np.array([0.7, 0.7])
    rng = np.random.default_rng(3)
    half = rng.normal(size=(6, 2))
    bg = np.vstack([half, half[:, ::-1]])  # closed under the swap
    for att in (shapley_brute_force(e, x, bg), shapley_interventional_tree(e, x, bg)):
        assert abs(att.phi[0] - att.phi[1]) <= 1e-12


def test_kernel_equals_brute_force_single_pair(kernel_backend):
    rng = np.random.default_rng(4)
    for _ in range(20):
        e = random_ensemble(rng, m=4, n_trees=1, max_depth=3)
        x = rng.normal(size=4)
        bg = rng.normal(size=(1, 4))
        a = shapley_brute_force(e, x, bg)
        b = shapley_interventional_tree(e, x, bg)
        np.testing.assert_allclose(b.phi, a.phi, rtol=0, atol=1e-12)
        assert b.expected_background_output == pytest.approx(
            a.expected_background_output, abs=1e-12
        )


def test_kernel_equals_brute_force_random(kernel_backend):
    rng = np.random.default_rng(5)
    for _ in range(25):
        m = int(rng.integers(2, 9))
        e = random_ensemble(rng, m=m, n_trees=int(rng.integers(1, 25)), max_depth=4)
        x = rng.normal(size=m)
        bg = rng.normal(size=(int(rng.integers(1, 12)), m))
        a = shapley_brute_force(e, x, bg)
        b = shapley_interventional_tree(e, x, bg)
        assert np.abs(a.phi - b.phi).max() <= 1e-9


def test_background_equal_to_query_zeroes_phi(kernel_backend):
    rng = np.random.default_rng(6)
    e = random_ensemble(rng, m=3, n_trees=10, max_depth=3)
    x = rng.normal(size=3)
    bg = np.tile(x, (4, 1))
    att = shapley_interventional_tree(e, x, bg)
    np.testing.assert_array_equal(att.phi, np.zeros(3))
    assert att.expected_background_output == pytest.approx(e.predict_margin(x), abs=1e-12)


def test_additivity_property(kernel_backend):
    rng = np.random.default_rng(7)
    for _ in range(15):
        m = int(rng.integers(2, 7))
        e = random_ensemble(rng, m=m, n_trees=int(rng.integers(1, 30)), max_depth=4,
                            base=float(rng.normal()))
        x = rng.normal(size=m)
        bg = rng.normal(size=(int(rng.integers(1, 15)), m))
        att = shapley_interventional_tree(e, x, bg)
        lhs = att.phi.sum() + att.expected_background_output
        assert lhs == pytest.approx(e.predict_margin(x), abs=1e-9)
        # equivalently: sum(phi) = f(x) - mean_f(background)
        assert att.phi.sum() == pytest.approx(
            e.predict_margin(x) - e.predict_margin_matrix(bg).mean(), abs=1e-9
        )


def test_linearity_in_background(kernel_backend):
    rng = np.random.default_rng(8)
    e = random_ensemble(rng, m=4, n_trees=12, max_depth=3)
    x = rng.normal(size=4)
    d1 = rng.normal(size=(4, 4))
    d2 = rng.normal(size=(9, 4))
    phi1 = shapley_interventional_tree(e, x, d1).phi
    phi2 = shapley_interventional_tree(e, x, d2).phi
    both = shapley_interventional_tree(e, x, np.vstack([d1, d2])).phi
    np.testing.assert_allclose(both, (4 * phi1 + 9 * phi2) / 13, rtol=0, atol=1e-12)


def test_linearity_over_trees_at_fixed_background(kernel_backend):
    rng = np.random.default_rng(9)
    a = random_ensemble(rng, m=4, n_trees=6, max_depth=3, base=0.5)
    b = random_ensemble(rng, m=4, n_trees=9, max_depth=3, base=-0.2)
    trees = json.loads(serialize_model(a))["trees"] + json.loads(serialize_model(b))["trees"]
    both = build_model(trees, base=0.3, n_features=4)
    x = rng.normal(size=4)
    bg = rng.normal(size=(7, 4))
    att_a = shapley_interventional_tree(a, x, bg)
    att_b = shapley_interventional_tree(b, x, bg)
    att = shapley_interventional_tree(both, x, bg)
    np.testing.assert_allclose(att.phi, att_a.phi + att_b.phi, rtol=0, atol=1e-10)
    # base scores live in phi0
    assert att.expected_background_output == pytest.approx(
        att_a.expected_background_output + att_b.expected_background_output - 0.5 - (-0.2) + 0.3,
        abs=1e-10,
    )


def test_duplicates_count_multiply(kernel_backend):
    rng = np.random.default_rng(10)
    e = random_ensemble(rng, m=3, n_trees=8, max_depth=3)
    x = rng.normal(size=3)
    p, q = rng.normal(size=3), rng.normal(size=3)
    weighted = shapley_interventional_tree(e, x, np.array([p, p, q])).phi
    phi_p = shapley_interventional_tree(e, x, p[None, :]).phi
    phi_q = shapley_interventional_tree(e, x, q[None, :]).phi
    np.testing.assert_allclose(weighted, (2 * phi_p + phi_q) / 3, rtol=0, atol=1e-12)


def test_guards():
    rng = np.random.default_rng(11)
    e = random_ensemble(rng, m=2, n_trees=2, max_depth=2)
    with pytest.raises(EmptyBackground):
        shapley_interventional_tree(e, np.zeros(2), np.empty((0, 2)))
    wide = random_ensemble(rng, m=21, n_trees=1, max_depth=2)
    with pytest.raises(TooManyFeatures):
        shapley_brute_force(wide, np.zeros(21), np.zeros((1, 21)))


def test_attribution_serializes():
    rng = np.random.default_rng(12)
    e = random_ensemble(rng, m=2, n_trees=3, max_depth=2)
    att = shapley_interventional_tree(e, rng.normal(size=2), rng.normal(size=(3, 2)))
    payload = att.to_json()
    assert set(payload) == {"phi", "phi0"}
    assert len(payload["phi"]) == 2
