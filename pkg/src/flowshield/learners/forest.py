from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from ..dataset import FlowTable
from . import _kernels as K
from .base import Model, feature_ids, require_rows, training_digest
from .tree import TreeModel, concat_trees, grow, sqrt_features


@dataclass
class ForestConfig:
    n_trees: int = 100
    max_features: int | str | None = "sqrt"
    max_depth: int | None = None
    min_samples_leaf: int = 1
    bootstrap: bool = True
    seed: int = 42
    n_jobs: int = 1

    def resolve_max_features(self, m: int) -> int:
        if self.max_features in (None, "all"):
            return m
        if self.max_features == "sqrt":
            return sqrt_features(m)
        return int(min(max(1, int(self.max_features)), m))

    def to_dict(self) -> dict:
        return {"n_trees": self.n_trees, "max_features": self.max_features, "max_depth": self.max_depth,
                "min_samples_leaf": self.min_samples_leaf, "bootstrap": self.bootstrap, "seed": self.seed}


@dataclass(eq=False, kw_only=True)
class ForestModel(Model):
    """Bagged CART ensemble; P(Y=1) is the mean of the trees' leaf values."""

    kind = "forest"

    trees: list[TreeModel]
    vote_rule: str = "mean_probability"
    oob_accuracy: float | None = None
    _flat: tuple | None = field(default=None, repr=False)

    def flat(self):
        if self._flat is None:
            self._flat = concat_trees(self.trees)
        return self._flat

    def _proba(self, X):
        feature, threshold, left, right, value, roots = self.flat()
        out = np.empty(X.shape[0], dtype=np.float64)
        K.ensemble_sum(feature, threshold, left, right, value, roots, X, out)
        return out / len(self.trees)


def _tree_streams(seed: int, n_trees: int):
    return [np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(t,))) for t in range(n_trees)]


def train_random_forest(train: FlowTable, cfg: ForestConfig = ForestConfig()) -> ForestModel:
    """Bootstrap-aggregated Gini trees with per-split feature subsampling.

    Each tree draws its bootstrap multiplicities and its split-sampling seed
    from its own generator derived from ``(cfg.seed, tree index)``, so the
    ensemble is identical for any ``cfg.n_jobs``.
    """
    require_rows(train, "train_random_forest")
    X = train.features
    n, m = X.shape
    y = train.labels.astype(np.float64)
    Xt = np.ascontiguousarray(X.T)
    base_sorted = K.presort(Xt, np.arange(n, dtype=np.int64))
    fids = feature_ids(train.feature_names)
    mf = cfg.resolve_max_features(m)
    streams = _tree_streams(cfg.seed, cfg.n_trees)

    def one(t: int):
        rng = streams[t]
        if cfg.bootstrap:
            cnt = np.bincount(rng.integers(0, n, size=n), minlength=n).astype(np.float64)
        else:
            cnt = np.ones(n)
        tree_seed = int(rng.integers(0, 2**63))
        presorted = base_sorted if not cfg.bootstrap else _filter_sorted(base_sorted, cnt)
        arrays = grow(X, cnt, cnt * y, cnt=cnt, max_depth=cfg.max_depth,
                      min_samples_leaf=cfg.min_samples_leaf, max_features=mf, fids=fids,
                      seed=tree_seed, presorted=presorted, Xt=Xt)
        return TreeModel(feature_names=train.feature_names, **arrays), cnt

    if cfg.n_jobs > 1:
        with ThreadPoolExecutor(max_workers=cfg.n_jobs) as pool:
            results = list(pool.map(one, range(cfg.n_trees)))
    else:
        results = [one(t) for t in range(cfg.n_trees)]

    trees = [r[0] for r in results]
    oob = None
    if cfg.bootstrap:
        votes = np.zeros(n)
        seen = np.zeros(n)
        for tree, cnt in results:
            rows = np.flatnonzero(cnt == 0)
            if rows.size:
                votes[rows] += tree.raw(X[rows])
                seen[rows] += 1
        mask = seen > 0
        if mask.any():
            pred = (votes[mask] / seen[mask] >= 0.5).astype(np.int64)
            oob = float(np.mean(pred == train.labels[mask]))
    return ForestModel(feature_names=train.feature_names, trees=trees, hyperparameters=cfg.to_dict(),
                       training_digest=training_digest(train, "forest"), oob_accuracy=oob)


def _filter_sorted(base_sorted: np.ndarray, cnt: np.ndarray) -> np.ndarray:
    mask = cnt > 0
    n_keep = int(mask.sum())
    out = np.empty((base_sorted.shape[0], n_keep), dtype=np.int64)
    for f in range(base_sorted.shape[0]):
        row = base_sorted[f]
        out[f] = row[mask[row]]
    return out
