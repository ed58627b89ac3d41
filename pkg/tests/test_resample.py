import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from flowshield.errors import DataError
from flowshield.resample import SmoteConfig, random_undersample, smote, synthetic_count

from conftest import make_table


def imbalanced(n_min, n_maj, m=3, seed=0):
    rng = np.random.default_rng(seed)
    X = np.vstack([rng.normal(0, 1, (n_maj, m)), rng.normal(3, 1, (n_min, m))])
    y = np.r_[np.zeros(n_maj, int), np.ones(n_min, int)]
    return make_table(X, y)


def test_balanced_table_is_unchanged():
    t = imbalanced(50, 50)
    out, rep = smote(t, SmoteConfig())
    assert out is t
    assert rep.synthetic_added == 0


def test_ten_ninety_adds_eighty():
    out, rep = smote(imbalanced(10, 90), SmoteConfig(k_neighbors=3))
    assert rep.synthetic_added == 80
    assert out.class_counts() == (90, 90)
    assert rep.resulting_fraction == 0.5


def test_two_points_interpolate_on_segment():
    X = [[0.0, 0.0], [2.0, 2.0]] + [[float(i), -5.0] for i in range(20)]
    y = [1, 1] + [0] * 20
    out, rep = smote(make_table(X, y), SmoteConfig(k_neighbors=1))
    synth = out.features[22:]
    assert len(synth) == 18
    assert np.array_equal(synth[:, 0], synth[:, 1])
    assert ((synth >= 0.0) & (synth <= 2.0)).all()


def test_output_keeps_original_rows_verbatim_and_first():
    t = imbalanced(15, 60)
    out, _ = smote(t, SmoteConfig(k_neighbors=4))
    assert np.array_equal(out.features[: t.row_count].view(np.uint64), t.features.view(np.uint64))
    assert np.array_equal(out.labels[: t.row_count], t.labels)


def test_smote_errors():
    with pytest.raises(DataError):
        smote(make_table([[1.0], [2.0]], [0, 0]))
    with pytest.raises(DataError, match="smaller k"):
        smote(imbalanced(5, 50), SmoteConfig(k_neighbors=5))
    with pytest.raises(ValueError):
        SmoteConfig(k_neighbors=0)
    with pytest.raises(ValueError):
        SmoteConfig(target_minority_fraction=0.6)


def test_minority_label_zero_is_oversampled():
    t = imbalanced(12, 40)
    flipped = make_table(t.features, 1 - t.labels)
    out, rep = smote(flipped, SmoteConfig(k_neighbors=3))
    assert rep.minority_label == 0
    assert out.class_counts() == (40, 40)


def brute_knn_radius(Xmin, i, k):
    d = np.sqrt(((Xmin - Xmin[i]) ** 2).sum(axis=1))
    d = np.delete(d, i)
    return np.sort(d)[k - 1]


@given(st.integers(0, 10_000), st.integers(6, 25), st.integers(30, 80), st.integers(1, 5),
       st.sampled_from([0.3, 0.4, 0.5]))
def test_provenance_convex_combination_and_balance(seed, n_min, n_maj, k, target):
    t = imbalanced(n_min, n_maj, m=2, seed=seed)
    out, rep = smote(t, SmoteConfig(k_neighbors=k, target_minority_fraction=target, seed=seed))
    p = rep.provenance
    synth = out.features[t.row_count:]
    X = t.features
    expect = X[p.source] + p.u[:, None] * (X[p.neighbor] - X[p.source])
    assert np.all(np.abs(synth - expect) <= 1e-9)
    assert ((p.u >= 0) & (p.u <= 1)).all()
    minority_rows = np.flatnonzero(t.labels == 1)
    Xmin = X[minority_rows]
    pos = {r: i for i, r in enumerate(minority_rows)}
    for s_row, n_row in zip(p.source, p.neighbor):
        assert t.labels[s_row] == t.labels[n_row] == 1
        d = np.sqrt(((X[s_row] - X[n_row]) ** 2).sum())
        assert d <= brute_knn_radius(Xmin, pos[s_row], k) + 1e-12
    n0, n1 = out.class_counts()
    if rep.synthetic_added:
        assert abs(n1 / out.row_count - target) <= 1.0 / out.row_count
    else:  # already at or above target: nothing to add
        assert n1 / out.row_count >= target - 1.0 / out.row_count


def test_smote_is_thread_count_independent():
    t = imbalanced(40, 300, m=4, seed=3)
    a, _ = smote(t, SmoteConfig(seed=9), n_jobs=1)
    b, _ = smote(t, SmoteConfig(seed=9), n_jobs=8)
    assert np.array_equal(a.features.view(np.uint64), b.features.view(np.uint64))


def test_standardized_space_changes_neighbours_only():
    t = imbalanced(20, 100, m=2, seed=5)
    X = t.features.copy()
    X[:, 1] *= 1000.0
    t = make_table(X, t.labels)
    out, rep = smote(t, SmoteConfig(k_neighbors=2, space="standardized"))
    p = rep.provenance
    synth = out.features[t.row_count:]
    np.testing.assert_allclose(synth, X[p.source] + p.u[:, None] * (X[p.neighbor] - X[p.source]), atol=1e-9)


@given(st.integers(1, 500), st.integers(1, 500), st.sampled_from([0.1, 0.25, 0.5]))
def test_synthetic_count_hits_target_within_one_row(m, M, f):
    m, M = min(m, M), max(m, M)
    s = synthetic_count(m, M, f)
    total = m + M + s
    if s > 0:
        assert abs((m + s) / total - f) <= 1.0 / total


# ---------------------------------------------------------------- undersampling

def test_undersample_identity_and_counting():
    t = imbalanced(20, 100)
    same, rep = random_undersample(t, 1.0)
    assert same.equals(t)
    assert rep.rows_removed == 0
    out, rep = random_undersample(t, 0.25, seed=1)
    assert out.class_counts() == (25, 20)
    assert rep.rows_removed == 75


def test_undersample_is_seeded_and_order_preserving():
    t = imbalanced(20, 100)
    _, a = random_undersample(t, 0.3, seed=4)
    _, b = random_undersample(t, 0.3, seed=4)
    assert np.array_equal(a.kept_rows, b.kept_rows)
    assert np.all(np.diff(a.kept_rows) > 0)
    assert set(np.flatnonzero(t.labels == 1)) <= set(a.kept_rows)


def test_undersample_errors():
    t = imbalanced(2, 10)
    with pytest.raises(DataError):
        random_undersample(t, 0.0)
    with pytest.raises(DataError, match="leaves none"):
        random_undersample(t, 0.01)
