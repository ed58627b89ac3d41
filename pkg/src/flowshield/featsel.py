"""Feature ranking and selection.

Three families are provided: filter scores (Pearson correlation, one-way
ANOVA F), embedded forest impurity importances, and backward elimination
by logistic-regression Wald p-values. Each returns explicit ``undefined``
markers (``None``) instead of silently substituting zeros.
"""
from __future__ import annotations

import math
from collections.abc import Sequence
from dataclasses import dataclass, field

import numpy as np

from .dataset import FlowTable, StandardizeStats
from .errors import DataError, DegenerateTableError, NonConvergenceError
from .learners.base import require_both_classes
from .learners.forest import ForestConfig, train_random_forest
from .learners.linear import irls, with_intercept

Z_975 = 1.959964
NULL_EIG_PER_ROW = 1e-8
NULL_LOADING = 0.1
INTERCEPT_NAME = "const"


# ---------------------------------------------------------------- containers

@dataclass(frozen=True)
class FeatureSubset:
    """Ordered, nonempty set of feature names plus how it was obtained."""

    names: tuple[str, ...]
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        names = tuple(self.names)
        if not names:
            raise DataError("a feature subset cannot be empty")
        if len(set(names)) != len(names):
            raise DataError(f"duplicate names in feature subset: {list(names)}")
        object.__setattr__(self, "names", names)

    def __len__(self) -> int:
        return len(self.names)

    def to_dict(self) -> dict:
        return {"names": list(self.names), "provenance": self.provenance}

    @classmethod
    def from_dict(cls, d: dict) -> "FeatureSubset":
        return cls(tuple(d["names"]), dict(d.get("provenance", {})))


@dataclass
class CorrelationMatrix:
    values: np.ndarray
    feature_names: tuple[str, ...]
    degenerate_flags: np.ndarray

    def get(self, a: str, b: str) -> float:
        i, j = self.feature_names.index(a), self.feature_names.index(b)
        return float(self.values[i, j])

    def to_dict(self) -> dict:
        return {"feature_names": list(self.feature_names), "values": self.values.tolist(),
                "degenerate": [bool(v) for v in self.degenerate_flags]}


@dataclass
class AnovaScores:
    """Per-feature F statistic; ``infinite`` marks zero within-class variance."""

    feature_names: tuple[str, ...]
    f: np.ndarray
    infinite: np.ndarray

    def to_dict(self) -> dict:
        return {"feature_names": list(self.feature_names),
                "f": [None if inf else float(v) for v, inf in zip(self.f, self.infinite)],
                "infinite": [bool(v) for v in self.infinite]}


@dataclass
class ImportanceRanking:
    feature_names: tuple[str, ...]
    scores: np.ndarray
    order: tuple[str, ...] = ()
    method: str = "forest_gini"

    def __post_init__(self):
        self.scores = np.asarray(self.scores, dtype=np.float64)
        if not self.order:
            self.order = tuple(self.feature_names[i] for i in rank_order(self.scores))

    def score(self, name: str) -> float:
        return float(self.scores[self.feature_names.index(name)])

    def to_dict(self) -> dict:
        return {"method": self.method, "feature_names": list(self.feature_names),
                "scores": [float(s) for s in self.scores], "order": list(self.order)}


@dataclass
class CoefficientStats:
    """Wald summary of one logistic coefficient; ``None`` marks an undefined entry."""

    feature: str
    coef: float
    std_err: float | None = None
    z: float | None = None
    p_value: float | None = None
    ci_low: float | None = None
    ci_high: float | None = None
    is_intercept: bool = False

    @property
    def defined(self) -> bool:
        return self.p_value is not None

    def to_dict(self) -> dict:
        return dict(self.__dict__)

    @classmethod
    def from_estimate(cls, feature: str, coef: float, std_err: float | None,
                      is_intercept: bool = False) -> "CoefficientStats":
        if std_err is None or not math.isfinite(std_err) or std_err <= 0.0:
            return cls(feature, coef, is_intercept=is_intercept)
        z = coef / std_err
        return cls(feature, coef, std_err, z, math.erfc(abs(z) / math.sqrt(2.0)),
                   coef - Z_975 * std_err, coef + Z_975 * std_err, is_intercept)


def rank_order(scores) -> np.ndarray:
    """Indices by descending score; equal scores keep ascending column order."""
    return np.argsort(-np.asarray(scores, dtype=np.float64), kind="stable")


# ---------------------------------------------------------------- filters

def pearson_matrix(table: FlowTable, include_target: bool = False) -> CorrelationMatrix:
    """Pairwise Pearson correlation of the feature columns (and the label if asked).

    Constant columns are flagged degenerate; their correlation with every
    other column is 0 and their diagonal entry is 0.

    Raises:
        DataError: fewer than 2 rows.
    """
    if table.row_count < 2:
        raise DataError("pearson_matrix needs at least 2 rows")
    X = table.features
    names = list(table.feature_names)
    if include_target:
        X = np.column_stack([X, table.labels.astype(np.float64)])
        names.append(table.schema.label_column)
    centered = X - X.mean(axis=0)
    norms = np.sqrt((centered * centered).sum(axis=0))
    degenerate = np.ptp(X, axis=0) == 0.0
    safe = np.where(degenerate, 1.0, norms)
    unit = centered / safe
    r = unit.T @ unit
    r = np.clip(0.5 * (r + r.T), -1.0, 1.0)
    r[degenerate, :] = 0.0
    r[:, degenerate] = 0.0
    idx = np.flatnonzero(~degenerate)
    r[idx, idx] = 1.0
    return CorrelationMatrix(r, tuple(names), degenerate)


def target_correlations(table: FlowTable) -> np.ndarray:
    """Pearson r of every feature with the binary label."""
    return pearson_matrix(table, include_target=True).values[-1, :-1].copy()


def anova_f_scores(table: FlowTable) -> AnovaScores:
    """One-way ANOVA F of each feature grouped by label (1 and n-2 degrees of freedom).

    A feature constant within both classes but with different class means
    gets ``inf`` and an ``infinite`` flag; a feature constant overall gets 0.

    Raises:
        DataError: either class has fewer than 2 rows.
    """
    n0, n1 = table.class_counts()
    if n0 < 2 or n1 < 2:
        raise DataError(f"anova_f_scores needs >= 2 rows per class (benign={n0}, attack={n1})")
    X = table.features
    g0, g1 = X[table.labels == 0], X[table.labels == 1]
    m0, m1, m = g0.mean(axis=0), g1.mean(axis=0), X.mean(axis=0)
    ssb = n0 * (m0 - m) ** 2 + n1 * (m1 - m) ** 2
    ssw = ((g0 - m0) ** 2).sum(axis=0) + ((g1 - m1) ** 2).sum(axis=0)
    flat = (np.ptp(g0, axis=0) == 0.0) & (np.ptp(g1, axis=0) == 0.0)
    ssw = np.where(flat, 0.0, ssw)
    with np.errstate(divide="ignore", invalid="ignore"):
        f = ssb / (ssw / (n0 + n1 - 2))
    same_means = flat & (m0 == m1)
    infinite = flat & ~same_means
    f = np.where(same_means, 0.0, np.where(infinite, np.inf, f))
    return AnovaScores(table.feature_names, f, infinite)


def redundancy_filter(corr: CorrelationMatrix, target_corr, pair_threshold: float = 0.9) -> FeatureSubset:
    """Greedy pass by descending ``|target_corr|``: drop a feature whose |r| with
    an already kept feature exceeds ``pair_threshold``."""
    target = np.abs(np.asarray(target_corr, dtype=np.float64))
    n = len(target)
    if corr.values.shape[0] < n:
        raise DataError("correlation matrix does not cover every candidate feature")
    kept: list[int] = []
    dropped: dict[str, str] = {}
    for i in rank_order(target):
        clash = next((j for j in kept if abs(corr.values[i, j]) > pair_threshold), None)
        if clash is None:
            kept.append(int(i))
        else:
            dropped[corr.feature_names[i]] = corr.feature_names[clash]
    return FeatureSubset(tuple(corr.feature_names[i] for i in kept),
                         {"method": "redundancy_filter", "pair_threshold": pair_threshold,
                          "dropped_for": dropped})


# ---------------------------------------------------------------- embedded

def importance_config(seed: int = 42, n_jobs: int = 1) -> ForestConfig:
    """Forest used for importances: 100 trees, ceil(sqrt(m)) candidates, depth 12, bootstrap."""
    return ForestConfig(n_trees=100, max_features="sqrt", max_depth=12, bootstrap=True, seed=seed,
                        n_jobs=n_jobs)


def tree_importances(table: FlowTable, forest_cfg: ForestConfig | None = None) -> ImportanceRanking:
    """Mean decrease in Gini impurity, normalized per tree, averaged, renormalized.

    Raises:
        DegenerateTableError: no tree could make a single split.
    """
    require_both_classes(table, "tree_importances")
    forest = train_random_forest(table, forest_cfg or importance_config())
    acc = np.zeros(table.col_count)
    for tree in forest.trees:
        dec = tree.impurity_decrease()
        total = dec.sum()
        if total > 0.0:
            acc += dec / total
    if acc.sum() <= 0.0:
        raise DegenerateTableError("no informative split found; every feature is constant")
    return ImportanceRanking(table.feature_names, acc / acc.sum())


def select_top_k(ranking: ImportanceRanking, k: int) -> FeatureSubset:
    if not 1 <= k <= len(ranking.order):
        raise DataError(f"k={k} must be between 1 and {len(ranking.order)}")
    return FeatureSubset(ranking.order[:k], {"method": ranking.method, "k": k})


def intersect_subsets(*subsets: FeatureSubset) -> FeatureSubset:
    """Names present in every subset, in the order of the first."""
    common = set(subsets[0].names).intersection(*(s.names for s in subsets[1:]))
    return FeatureSubset(tuple(n for n in subsets[0].names if n in common),
                         {"method": "intersection", "of": [s.provenance for s in subsets]})


def union_subsets(*subsets: FeatureSubset) -> FeatureSubset:
    """Every name of every subset, in order of first appearance."""
    names = list(dict.fromkeys(n for s in subsets for n in s.names))
    return FeatureSubset(tuple(names), {"method": "union", "of": [s.provenance for s in subsets]})


# ---------------------------------------------------------------- logistic Wald

def _null_coordinates(info: np.ndarray, n_rows: int) -> np.ndarray:
    """Coordinates loading on directions the data cannot identify."""
    eigval, eigvec = np.linalg.eigh(0.5 * (info + info.T))
    null = eigval <= NULL_EIG_PER_ROW * n_rows
    if not null.any():
        return np.zeros(info.shape[0], dtype=bool)
    return (np.abs(eigvec[:, null]) >= NULL_LOADING).any(axis=1)


def logit_wald(table: FlowTable, features: FeatureSubset | Sequence[str] | None = None,
               max_iter: int = 50, tol: float = 1e-8, jitter: float = 1e-8,
               include_intercept: bool = False) -> list[CoefficientStats]:
    """Unpenalized logistic fit by IRLS and a Wald summary per coefficient.

    The fit runs on standardized columns; coefficients and their covariance
    are mapped back to raw units. Directions of the observed information
    with eigenvalue at most ``1e-8 * rows`` (singular designs, separation)
    are unidentified: every coefficient loading on them has an undefined
    standard error, z, p-value and interval, and its ``coef`` is the last
    iterate. ``p = erfc(|z| / sqrt 2)`` and the interval is
    ``coef -/+ 1.959964 * std_err``.

    Raises:
        NonConvergenceError: IRLS hit ``max_iter`` on an identifiable model;
            carries the last iterate.
    """
    require_both_classes(table, "logit_wald")
    names = tuple(features.names if isinstance(features, FeatureSubset) else (features or table.feature_names))
    sub = table.select(names)
    stats = StandardizeStats.fit(sub.features)
    A = with_intercept(stats.apply(sub.features))
    y = sub.labels.astype(np.float64)
    res = irls(A, y, l2=0.0, max_iter=max_iter, tol=tol, jitter=jitter)
    undefined = _null_coordinates(res.information, sub.row_count)
    if not res.converged and not undefined.any():
        raise NonConvergenceError(f"logit_wald: IRLS did not converge in {max_iter} iterations",
                                  last_iterate=res.beta, iterations=res.iterations)

    p = A.shape[1]
    cov = np.full((p, p), np.nan)
    ok = np.flatnonzero(~undefined)
    if ok.size:
        cov[np.ix_(ok, ok)] = np.linalg.inv(res.information[np.ix_(ok, ok)])
    # raw = T @ standardized: slope_j = b_j / s_j, intercept = b0 - sum_j b_j m_j / s_j
    T = np.zeros((p, p))
    T[0, 0] = 1.0
    T[0, 1:] = -stats.means / stats.std_devs
    T[np.arange(1, p), np.arange(1, p)] = 1.0 / stats.std_devs
    coef = T @ res.beta
    used = T != 0.0
    out = []
    for i in range(p):
        se = None
        if not undefined[used[i]].any():
            cols = np.flatnonzero(used[i])
            var = T[i, cols] @ cov[np.ix_(cols, cols)] @ T[i, cols]
            se = math.sqrt(var) if var > 0.0 else None
        name = INTERCEPT_NAME if i == 0 else names[i - 1]
        out.append(CoefficientStats.from_estimate(name, float(coef[i]), se, is_intercept=(i == 0)))
    return out if include_intercept else out[1:]


def eliminate_by_pvalue(stats: Sequence[CoefficientStats], alpha: float = 0.05) -> FeatureSubset:
    """Keep features whose defined p-value is below ``alpha``.

    Features with an undefined p-value are dropped and listed under
    ``questionable`` in the provenance. The intercept is never a feature.

    Raises:
        DataError: ``stats`` is empty or nothing is retained.
    """
    stats = [s for s in stats if not s.is_intercept]
    if not stats:
        raise DataError("eliminate_by_pvalue: no coefficient statistics given")
    kept = [s.feature for s in stats if s.p_value is not None and s.p_value < alpha]
    questionable = [s.feature for s in stats if s.p_value is None]
    rejected = [s.feature for s in stats if s.p_value is not None and s.p_value >= alpha]
    if not kept:
        raise DataError(f"no feature has p < {alpha}")
    return FeatureSubset(tuple(kept), {"method": "logit_wald", "alpha": alpha,
                                       "questionable": questionable, "rejected": rejected})


def _cell(v, fmt: str) -> str:
    return "nan" if v is None else format(v, fmt)


def format_wald_table(stats: Sequence[CoefficientStats]) -> str:
    """Aligned text table with columns Coef., Std.Err., z, P>|z|, [0.025, 0.975]."""
    header = ["", "Coef.", "Std.Err.", "z", "P>|z|", "[0.025", "0.975]"]
    rows = [[s.feature, _cell(s.coef, ".4f"), _cell(s.std_err, ".4f"), _cell(s.z, ".4f"),
             _cell(s.p_value, ".4f"), _cell(s.ci_low, ".4f"), _cell(s.ci_high, ".4f")] for s in stats]
    widths = [max(len(r[c]) for r in [header] + rows) for c in range(len(header))]
    lines = []
    for r in [header] + rows:
        lines.append("  ".join([r[0].ljust(widths[0])] + [r[c].rjust(widths[c]) for c in range(1, len(r))]))
    return "\n".join(lines) + "\n"
