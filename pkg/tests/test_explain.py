"""ICE curves, partial dependence and surrogate trees."""
import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import make_table
from flowshield.errors import DataError, SchemaError
from flowshield.explain import default_grid, describe_tree, ice, surrogate_tree
from flowshield.learners import CartConfig, ForestConfig, Model, train_cart, train_random_forest
from flowshield.learners.tree import TreeModel
from flowshield.synthetic import single_feature_fixture


def stump(feature_names, feature, threshold, low=0.0, high=1.0):
    return TreeModel(feature_names=tuple(feature_names), feature=[feature, -1, -1], threshold=[threshold, 0, 0],
                     left=[1, -1, -1], right=[2, -1, -1], value=[0.5, low, high])


class XorModel(Model):
    kind = "xor"

    def _proba(self, X):
        return ((X[:, 0] > 0) ^ (X[:, 1] > 0)).astype(float)


# ---------------------------------------------------------------- ICE

def test_ignored_feature_gives_flat_curves():
    rng = np.random.default_rng(0)
    t = make_table(rng.normal(size=(50, 2)), rng.integers(0, 2, 50))
    model = stump(t.feature_names, 1, 0.0)
    out = ice(model, t, "f0", n_quantiles=15)
    assert np.all(out.curves == out.curves[:, :1])


def test_stump_pdp_steps_at_threshold():
    X = np.arange(1.0, 7.0)[:, None]
    t = make_table(X, np.array([0, 0, 0, 1, 1, 1]))
    model = stump(t.feature_names, 0, 3.0)
    out = ice(model, t, "f0", grid=[1, 2, 2.9, 3, 3.1, 4, 5])
    assert out.pdp.tolist() == [0, 0, 0, 0, 1, 1, 1]


def test_unknown_feature_and_bad_grid():
    t = make_table(np.zeros((4, 1)), [0, 1, 0, 1])
    model = stump(t.feature_names, 0, 0.5)
    with pytest.raises(SchemaError):
        ice(model, t, "missing")
    with pytest.raises(DataError):
        ice(model, t, "f0", grid=[2, 1])


def test_default_grid_binary_and_quantiles():
    assert default_grid(np.array([0.0, 1.0, 1.0])).tolist() == [0.0, 1.0]
    g = default_grid(np.arange(1000.0), 20)
    assert g.size == 20 and np.all(np.diff(g) > 0)


@settings(max_examples=25)
@given(st.integers(0, 10_000))
def test_pdp_is_mean_and_row_order_invariant(seed):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(40, 3))
    y = (X[:, 0] + X[:, 2] > 0).astype(int)
    y[:2] = [0, 1]
    t = make_table(X, y)
    model = train_cart(t, CartConfig(max_depth=3))
    out = ice(model, t, "f0", n_quantiles=8)
    assert np.max(np.abs(out.pdp - out.curves.mean(axis=0))) <= 1e-12
    perm = rng.permutation(40)
    shuffled = ice(model, t.take(perm), "f0", grid=out.grid)
    assert np.array_equal(shuffled.curves, out.curves[perm])


def test_ice_subsample_is_seeded():
    t = single_feature_fixture(500, 3, 0, seed=1)
    model = train_cart(t, CartConfig(max_depth=2))
    a = ice(model, t, "f0", max_rows=50, seed=3)
    b = ice(model, t, "f0", max_rows=50, seed=3)
    assert a.rows.size == 50 and np.array_equal(a.rows, b.rows)
    assert len(a.to_text().splitlines()) == a.grid.size + 1


def test_planted_inbound_positive_relationship(planted):
    sub = planted.take(np.arange(8000))
    forest = train_random_forest(sub, ForestConfig(n_trees=20, seed=2))
    out = ice(forest, sub, "Inbound", max_rows=2000)
    assert out.grid.tolist() == [0.0, 1.0]
    assert out.pdp[1] > out.pdp[0]


# ---------------------------------------------------------------- surrogate

def test_cart_self_distillation_is_exact():
    t = single_feature_fixture(400, 4, 1, seed=5)
    model = train_cart(t, CartConfig(max_depth=4))
    res = surrogate_tree(model, t, depth_cap=4)
    assert res.fidelity == 1.0
    assert res.tree.depth() <= 4


def test_xor_single_split_fidelity_bounded():
    pts = np.array(list(itertools.product([-1.0, 1.0], repeat=2)) * 25)
    t = make_table(pts, np.zeros(len(pts)))
    res = surrogate_tree(XorModel(feature_names=("f0", "f1")), t, depth_cap=1)
    assert res.fidelity <= 0.75
    # every stump on the four XOR cells agrees on at most three of them
    labels = (pts[:, 0] > 0) ^ (pts[:, 1] > 0)
    for j, flip in itertools.product(range(2), (False, True)):
        guess = (pts[:, j] > 0) ^ flip
        assert np.mean(guess == labels) <= 0.75


def test_surrogate_roots_on_planted_feature():
    t = single_feature_fixture(1000, 10, 3, seed=0)
    forest = train_random_forest(t, ForestConfig(n_trees=30, seed=0))
    res = surrogate_tree(forest, t)
    assert res.tree.feature_names[res.tree.feature[0]] == "f3"
    assert res.to_dict()["root_feature"] == "f3"
    assert "if f3 <=" in describe_tree(res.tree).splitlines()[0]


@settings(max_examples=20)
@given(st.integers(0, 10_000), st.integers(1, 4))
def test_fidelity_at_least_best_constant(seed, depth):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(120, 3))
    y = (rng.random(120) < 0.4).astype(int)
    y[:2] = [0, 1]
    t = make_table(X, y)
    black_box = train_cart(t)
    res = surrogate_tree(black_box, t, depth_cap=depth)
    hard = black_box.predict(t)
    assert 0.0 <= res.fidelity <= 1.0
    # compare counts, since 1 - mean and mean of the complement can differ in the last bit
    agree = int(np.sum(res.tree.predict(t) == hard))
    attacks = int(hard.sum())
    assert agree >= max(attacks, hard.size - attacks)
    assert res.fidelity == agree / hard.size
    assert res.tree.depth() <= depth


def test_soft_surrogate_and_empty_table():
    t = single_feature_fixture(300, 3, 2, seed=2)
    forest = train_random_forest(t, ForestConfig(n_trees=10, seed=1))
    res = surrogate_tree(forest, t, depth_cap=2, soft=True)
    assert res.soft and res.tree.depth() <= 2
    with pytest.raises(DataError):
        surrogate_tree(forest, t.take(np.arange(0)))
