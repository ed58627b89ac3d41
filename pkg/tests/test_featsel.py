import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats as sps

from flowshield.errors import DataError, NonConvergenceError
from flowshield.featsel import (CoefficientStats, FeatureSubset, ImportanceRanking, anova_f_scores,
                                eliminate_by_pvalue, format_wald_table, intersect_subsets, logit_wald,
                                pearson_matrix, redundancy_filter, select_top_k, target_correlations,
                                tree_importances, union_subsets)
from flowshield.learners import ForestConfig
from flowshield.synthetic import single_feature_fixture

from conftest import make_table

Z_975 = 1.959964


def corr_of(x, y):
    return pearson_matrix(make_table(np.column_stack([x, y]), np.arange(len(x)) % 2)).values[0, 1]


# ---------------------------------------------------------------- pearson

def test_pearson_examples():
    assert corr_of([1, 2, 3], [2, 4, 6]) == pytest.approx(1.0, abs=1e-15)
    assert corr_of([1, 2, 3, 4], [4, 3, 2, 1]) == pytest.approx(-1.0, abs=1e-15)
    assert corr_of([1, 2, 3], [1, 3, 2]) == pytest.approx(0.5, abs=1e-15)


def test_pearson_diagonal_symmetry_and_degenerate_columns():
    rng = np.random.default_rng(0)
    X = np.column_stack([rng.normal(size=50), np.full(50, 3.0), rng.normal(size=50)])
    c = pearson_matrix(make_table(X, np.arange(50) % 2))
    assert c.degenerate_flags.tolist() == [False, True, False]
    assert c.values[0, 0] == c.values[2, 2] == 1.0
    assert (c.values[1] == 0).all() and (c.values[:, 1] == 0).all()
    assert np.array_equal(c.values, c.values.T)


def test_pearson_needs_two_rows():
    with pytest.raises(DataError):
        pearson_matrix(make_table([[1.0]], [0]))


@given(st.integers(0, 10_000), st.floats(0.01, 100), st.floats(-100, 100), st.floats(0.01, 100))
def test_pearson_matches_scipy_and_is_affine_invariant(seed, a, b, c):
    rng = np.random.default_rng(seed)
    x = rng.normal(size=30)
    y = 0.3 * x + rng.normal(size=30)
    r = corr_of(x, y)
    assert r == pytest.approx(sps.pearsonr(x, y)[0], abs=1e-12)
    assert corr_of(a * x + b, c * y - b) == pytest.approx(r, abs=1e-9)
    assert corr_of(-x, y) == pytest.approx(-r, abs=1e-9)


def test_target_correlations_include_label():
    y = np.array([0, 0, 1, 1])
    tc = target_correlations(make_table(np.column_stack([y * 2.0, [1.0, 2.0, 1.0, 2.0]]), y))
    assert tc[0] == pytest.approx(1.0)
    assert tc[1] == pytest.approx(0.0, abs=1e-15)


# ---------------------------------------------------------------- anova

def test_anova_examples():
    same = anova_f_scores(make_table([1.0, 2.0, 1.0, 2.0], [0, 0, 1, 1]))
    assert same.f[0] == 0.0
    flat = anova_f_scores(make_table([0.0, 0.0, 1.0, 1.0], [0, 0, 1, 1]))
    assert flat.infinite[0] and math.isinf(flat.f[0])
    hand = anova_f_scores(make_table([1.0, 2.0, 3.0, 4.0], [0, 0, 1, 1]))
    assert hand.f[0] == pytest.approx(8.0, abs=1e-12)
    constant = anova_f_scores(make_table([5.0, 5.0, 5.0, 5.0], [0, 0, 1, 1]))
    assert constant.f[0] == 0.0 and not constant.infinite[0]


def test_anova_needs_two_rows_per_class():
    with pytest.raises(DataError):
        anova_f_scores(make_table([1.0, 2.0, 3.0], [0, 0, 1]))


@given(st.integers(0, 10_000), st.integers(2, 30), st.integers(2, 30))
def test_anova_equals_pooled_t_squared(seed, n0, n1):
    rng = np.random.default_rng(seed)
    x = np.r_[rng.normal(0, 1, n0), rng.normal(0.5, 2, n1)]
    y = np.r_[np.zeros(n0, int), np.ones(n1, int)]
    f = anova_f_scores(make_table(x, y)).f[0]
    t = sps.ttest_ind(x[y == 0], x[y == 1], equal_var=True).statistic
    assert f == pytest.approx(t * t, rel=1e-9)
    assert f == pytest.approx(sps.f_oneway(x[y == 0], x[y == 1]).statistic, rel=1e-9)


# ---------------------------------------------------------------- importances

def small_forest(seed=0, trees=30):
    return ForestConfig(n_trees=trees, max_features="sqrt", max_depth=12, seed=seed)


def test_single_feature_importance_is_one():
    rng = np.random.default_rng(1)
    x = rng.normal(size=100)
    r = tree_importances(make_table(x, (x > 0).astype(int)), small_forest())
    assert r.scores.tolist() == [1.0]


def test_planted_threshold_feature_ranks_first():
    rng = np.random.default_rng(2)
    X = rng.normal(size=(400, 10))
    r = tree_importances(make_table(X, (X[:, 3] > 0).astype(int)), small_forest())
    assert r.order[0] == "f3"
    assert select_top_k(r, 1).names == ("f3",)
    assert r.scores.sum() == pytest.approx(1.0, abs=1e-9)
    assert (r.scores >= 0).all()


def test_all_noise_importance_stays_below_half():
    worst = 0.0
    for seed in range(100):
        rng = np.random.default_rng([seed, 7])
        X = rng.normal(size=(200, 10))
        y = rng.integers(0, 2, 200)
        r = tree_importances(make_table(X, y), small_forest(seed, trees=10))
        worst = max(worst, float(r.scores.max()))
    assert worst < 0.5


@settings(max_examples=10)
@given(st.permutations(list(range(6))), st.integers(0, 1000))
def test_importances_are_permutation_equivariant(perm, seed):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(150, 6))
    y = ((X[:, 0] + X[:, 2]) > 0).astype(int)
    names = [f"f{j}" for j in range(6)]
    base = tree_importances(make_table(X, y, names), small_forest(seed, trees=8))
    permuted = tree_importances(make_table(X[:, perm], y, [names[j] for j in perm]), small_forest(seed, trees=8))
    for name in names:
        assert permuted.score(name) == pytest.approx(base.score(name), abs=1e-12)


def test_select_top_k_full_and_too_large():
    r = ImportanceRanking(("a", "b", "c"), np.array([0.2, 0.5, 0.3]))
    assert select_top_k(r, 3).names == ("b", "c", "a")
    assert select_top_k(r, 3).provenance == {"method": "forest_gini", "k": 3}
    with pytest.raises(DataError):
        select_top_k(r, 4)


def test_rank_ties_break_by_column_index():
    r = ImportanceRanking(("a", "b", "c"), np.array([0.25, 0.5, 0.25]))
    assert r.order == ("b", "a", "c")


# ---------------------------------------------------------------- redundancy filter

def test_redundancy_identical_features_keep_higher_target_corr():
    rng = np.random.default_rng(3)
    x = rng.normal(size=100)
    y = (x + rng.normal(size=100) > 0).astype(int)
    t = make_table(np.column_stack([x, x, rng.normal(size=100)]), y, ["a", "b", "c"])
    out = redundancy_filter(pearson_matrix(t), target_correlations(t))
    assert "a" in out.names and "b" not in out.names  # tie on |r| goes to the lower index
    assert out.provenance["dropped_for"] == {"b": "a"}


def test_redundancy_filter_trace():
    from flowshield.featsel import CorrelationMatrix

    corr = CorrelationMatrix(np.array([[1.0, 0.95, 0.1], [0.95, 1.0, 0.2], [0.1, 0.2, 1.0]]),
                             ("f1", "f2", "f3"), np.zeros(3, bool))
    assert redundancy_filter(corr, [0.9, 0.8, 0.5], 0.9).names == ("f1", "f3")
    assert redundancy_filter(corr, [0.9, 0.8, 0.5], 0.96).names == ("f1", "f2", "f3")


# ---------------------------------------------------------------- subsets

def test_feature_subset_validation_and_set_ops():
    with pytest.raises(DataError):
        FeatureSubset(())
    with pytest.raises(DataError):
        FeatureSubset(("a", "a"))
    a, b = FeatureSubset(("x", "y", "z")), FeatureSubset(("z", "w", "x"))
    assert intersect_subsets(a, b).names == ("x", "z")
    assert union_subsets(a, b).names == ("x", "y", "z", "w")
    assert FeatureSubset.from_dict(a.to_dict()) == a


# ---------------------------------------------------------------- logit_wald

def check_wald_identities(s: CoefficientStats):
    if s.std_err is None:
        assert s.z is None and s.p_value is None and s.ci_low is None and s.ci_high is None
        return
    assert s.z == pytest.approx(s.coef / s.std_err, abs=1e-9)
    assert s.ci_low == pytest.approx(s.coef - Z_975 * s.std_err, abs=1e-9)
    assert s.ci_high == pytest.approx(s.coef + Z_975 * s.std_err, abs=1e-9)
    assert s.p_value == pytest.approx(2.0 * sps.norm.sf(abs(s.z)), rel=1e-9, abs=1e-300)
    assert 0.0 <= s.p_value <= 1.0


def test_known_beta_recovered_within_three_standard_errors():
    rng = np.random.default_rng(11)
    x = rng.normal(size=50_000)
    p = 1.0 / (1.0 + np.exp(-(0.5 - 1.0 * x)))
    y = (rng.random(50_000) < p).astype(int)
    const, slope = logit_wald(make_table(x, y, ["x"]), include_intercept=True)
    assert const.is_intercept
    assert abs(const.coef - 0.5) < 3 * const.std_err
    assert abs(slope.coef + 1.0) < 3 * slope.std_err
    check_wald_identities(const)
    check_wald_identities(slope)


def test_wald_standard_errors_match_inverse_information_oracle():
    rng = np.random.default_rng(5)
    X = rng.normal(size=(2000, 3)) * [1.0, 10.0, 0.1] + [0.0, 5.0, -1.0]
    eta = 0.2 + X @ np.array([0.7, -0.05, 3.0])
    y = (rng.random(2000) < 1 / (1 + np.exp(-eta))).astype(int)
    stats = logit_wald(make_table(X, y), include_intercept=True)
    A = np.column_stack([np.ones(2000), X])
    beta = np.array([s.coef for s in stats])
    mu = 1 / (1 + np.exp(-(A @ beta)))
    grad = A.T @ (y - mu)
    assert np.abs(grad).max() < 1e-6
    cov = np.linalg.inv(A.T @ (A * (mu * (1 - mu))[:, None]))
    np.testing.assert_allclose([s.std_err for s in stats], np.sqrt(np.diag(cov)), rtol=1e-6)
    for s in stats:
        check_wald_identities(s)


def test_null_feature_p_values_are_roughly_uniform():
    small = 0
    for seed in range(40):
        rng = np.random.default_rng([seed, 99])
        x = rng.normal(size=10_000)
        y = (rng.random(10_000) < 0.5).astype(int)
        const, slope = logit_wald(make_table(x, y, ["x"]), include_intercept=True)
        assert abs(slope.coef) < 5 * slope.std_err
        assert abs(const.coef - math.log(y.mean() / (1 - y.mean()))) < 3 * const.std_err
        small += slope.p_value < 0.05
    assert small <= 8  # about 2 expected out of 40


def test_separated_feature_has_undefined_statistics():
    rng = np.random.default_rng(4)
    noise = rng.normal(size=200)
    y = np.r_[np.zeros(100, int), np.ones(100, int)]
    sep = np.r_[rng.uniform(-2, -1, 100), rng.uniform(1, 2, 100)]
    stats = logit_wald(make_table(np.column_stack([sep, noise]), y, ["sep", "noise"]))
    by = {s.feature: s for s in stats}
    assert by["sep"].std_err is None and by["sep"].p_value is None
    for s in stats:
        check_wald_identities(s)
    assert "nan" in format_wald_table(stats)


def test_collinear_columns_are_undefined_but_others_are_not():
    rng = np.random.default_rng(6)
    a = rng.normal(size=500)
    c = rng.normal(size=500)
    y = (a + c + rng.normal(size=500) > 0).astype(int)
    stats = {s.feature: s for s in logit_wald(make_table(np.column_stack([a, 2 * a, c]), y, ["a", "a2", "c"]))}
    assert stats["a"].std_err is None and stats["a2"].std_err is None
    assert stats["c"].std_err is not None


def test_nonconvergence_carries_last_iterate():
    table = single_feature_fixture(500, 4, 1, seed=3)
    with pytest.raises(NonConvergenceError) as info:
        logit_wald(table, max_iter=1)
    assert info.value.last_iterate is not None
    assert info.value.iterations == 1


# ---------------------------------------------------------------- p-value elimination

def fake(name, p):
    return CoefficientStats(name, 1.0, None if p is None else 1.0, None, p)


def test_eliminate_examples():
    assert eliminate_by_pvalue([fake("a", 0.001), fake("b", 0.001)], 0.05).names == ("a", "b")
    assert eliminate_by_pvalue([fake("a", 0.01), fake("b", 0.5)], 0.05).names == ("a",)
    out = eliminate_by_pvalue([fake("a", 0.01), fake("b", None)], 0.05)
    assert out.names == ("a",)
    assert out.provenance["questionable"] == ["b"]
    with pytest.raises(DataError):
        eliminate_by_pvalue([fake("a", 0.5)], 0.05)
    with pytest.raises(DataError):
        eliminate_by_pvalue([], 0.05)


@given(st.lists(st.one_of(st.none(), st.floats(0, 1)), min_size=1, max_size=12),
       st.floats(0.001, 1), st.floats(0.001, 1))
def test_eliminate_is_monotone_in_alpha(ps, a1, a2):
    a1, a2 = sorted((a1, a2))
    stats = [fake(f"f{i}", p) for i, p in enumerate(ps)]

    def retained(alpha):
        try:
            return set(eliminate_by_pvalue(stats, alpha).names)
        except DataError:
            return set()

    assert retained(a1) <= retained(a2)
