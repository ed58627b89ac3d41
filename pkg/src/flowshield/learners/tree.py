"""CART classification trees over a flat node array."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..dataset import FlowTable
from ..errors import SchemaError
from . import _kernels as K
from .base import Model, feature_ids, require_rows, training_digest

UNBOUNDED_DEPTH = 10_000


def gini(p: float) -> float:
    return 1.0 - p * p - (1.0 - p) * (1.0 - p)


@dataclass
class CartConfig:
    max_depth: int | None = None
    min_samples_leaf: int = 1


@dataclass(eq=False, kw_only=True)
class TreeModel(Model):
    """Binary tree; node ``i`` is a leaf when ``feature[i] == -1``.

    Internal nodes send ``x[feature] > threshold`` to ``right``. ``value``
    is the class-1 fraction for classification trees and the Newton leaf
    weight for boosting trees. ``weight``/``impurity`` back the
    mean-decrease-in-impurity importances.
    """

    kind = "tree"

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray
    weight: np.ndarray = field(default=None)
    count: np.ndarray = field(default=None)
    impurity: np.ndarray = field(default=None)

    def __post_init__(self):
        n = len(self.feature)
        self.feature = np.asarray(self.feature, dtype=np.int64)
        self.threshold = np.asarray(self.threshold, dtype=np.float64)
        self.left = np.asarray(self.left, dtype=np.int64)
        self.right = np.asarray(self.right, dtype=np.int64)
        self.value = np.asarray(self.value, dtype=np.float64)
        for name in ("weight", "count", "impurity"):
            arr = getattr(self, name)
            setattr(self, name, np.zeros(n) if arr is None else np.asarray(arr, dtype=np.float64))

    @property
    def n_nodes(self) -> int:
        return len(self.feature)

    @property
    def is_leaf(self) -> np.ndarray:
        return self.feature < 0

    def depth(self) -> int:
        best = 0
        stack = [(0, 0)]
        while stack:
            node, d = stack.pop()
            best = max(best, d)
            if self.feature[node] >= 0:
                stack.append((self.left[node], d + 1))
                stack.append((self.right[node], d + 1))
        return best

    def validate(self) -> None:
        """Children in bounds, every node reached exactly once from the root."""
        n = self.n_nodes
        seen = np.zeros(n, dtype=bool)
        stack = [0]
        while stack:
            node = stack.pop()
            if not 0 <= node < n or seen[node]:
                raise SchemaError(f"tree node {node} out of bounds or revisited")
            seen[node] = True
            f = self.feature[node]
            if f >= 0:
                if f >= len(self.feature_names):
                    raise SchemaError(f"node {node} splits on unknown feature slot {f}")
                stack.extend((self.left[node], self.right[node]))
        if not seen.all():
            raise SchemaError("tree has unreachable nodes")

    def raw(self, X: np.ndarray) -> np.ndarray:
        out = np.empty(X.shape[0], dtype=np.float64)
        K.ensemble_sum(self.feature, self.threshold, self.left, self.right, self.value,
                       np.zeros(1, dtype=np.int64), X, out)
        return out

    def apply(self, rows) -> np.ndarray:
        """Leaf index reached by every row."""
        X = self._rows(rows)
        out = np.empty(X.shape[0], dtype=np.int64)
        K.leaf_ids(self.feature, self.threshold, self.left, self.right, 0, X, out)
        return out

    def _proba(self, X):
        return np.clip(self.raw(X), 0.0, 1.0)

    def impurity_decrease(self) -> np.ndarray:
        """Per-feature total weighted impurity decrease, relative to root weight."""
        out = np.zeros(len(self.feature_names))
        total = self.weight[0] if self.weight[0] > 0 else 1.0
        for node in np.flatnonzero(self.feature >= 0):
            l, r = self.left[node], self.right[node]
            dec = (self.weight[node] * self.impurity[node]
                   - self.weight[l] * self.impurity[l] - self.weight[r] * self.impurity[r])
            out[self.feature[node]] += max(dec, 0.0) / total
        return out


def _capacity(max_depth: int, n_active: int) -> int:
    by_rows = max(1, 2 * n_active - 1)
    if max_depth >= 40:
        return by_rows
    return min(2 ** (max_depth + 1) - 1, by_rows)


def grow(X: np.ndarray, s1: np.ndarray, s2: np.ndarray, *, criterion: int = K.GINI,
         cnt: np.ndarray | None = None, max_depth: int | None = None, min_samples_leaf: float = 1,
         min_child_weight: float = 0.0, lam: float = 0.0, gamma: float = 0.0,
         max_features: int | None = None, fids: np.ndarray | None = None, seed: int = 0,
         presorted: np.ndarray | None = None, Xt: np.ndarray | None = None) -> dict:
    """Run the compiled builder and return the node arrays as a dict.

    Rows with ``cnt == 0`` are excluded. ``presorted`` (from
    ``_kernels.presort``) is copied before use, so callers can reuse it.
    """
    n, m = X.shape
    if Xt is None:
        Xt = np.ascontiguousarray(X.T)
    if cnt is None:
        cnt = np.ones(n)
    if presorted is None:
        presorted = K.presort(Xt, np.flatnonzero(cnt > 0).astype(np.int64))
    else:
        presorted = presorted.copy()
    depth = UNBOUNDED_DEPTH if max_depth is None else int(max_depth)
    mf = m if max_features is None else int(min(max(1, max_features), m))
    if fids is None:
        fids = np.arange(m, dtype=np.uint64)
    arrays = K.build_tree(Xt, presorted, np.asarray(cnt, np.float64), np.asarray(s1, np.float64),
                          np.asarray(s2, np.float64), criterion, depth, float(min_samples_leaf),
                          float(min_child_weight), float(lam), float(gamma), mf, fids,
                          np.uint64(seed), _capacity(depth, presorted.shape[1]))
    keys = ("feature", "threshold", "left", "right", "value", "weight", "count", "impurity")
    return dict(zip(keys, arrays))


def train_cart(train: FlowTable, cfg: CartConfig = CartConfig()) -> TreeModel:
    """Greedy Gini-minimizing tree on raw features; leaves hold the class-1 fraction."""
    require_rows(train, "train_cart")
    y = train.labels.astype(np.float64)
    arrays = grow(train.features, np.ones_like(y), y, max_depth=cfg.max_depth,
                  min_samples_leaf=cfg.min_samples_leaf, fids=feature_ids(train.feature_names))
    return TreeModel(feature_names=train.feature_names,
                     hyperparameters={"max_depth": cfg.max_depth, "min_samples_leaf": cfg.min_samples_leaf},
                     training_digest=training_digest(train, "cart"), **arrays)


def tree_from_arrays(feature_names, arrays: dict, **kw) -> TreeModel:
    return TreeModel(feature_names=tuple(feature_names), **arrays, **kw)


def concat_trees(trees, values=None):
    """Concatenate trees into one node array set with per-tree root offsets."""
    offsets = np.cumsum([0] + [t.n_nodes for t in trees[:-1]]).astype(np.int64)
    feature = np.concatenate([t.feature for t in trees])
    threshold = np.concatenate([t.threshold for t in trees])
    left = np.concatenate([np.where(t.left >= 0, t.left + o, -1) for t, o in zip(trees, offsets)])
    right = np.concatenate([np.where(t.right >= 0, t.right + o, -1) for t, o in zip(trees, offsets)])
    if values is None:
        values = [t.value for t in trees]
    value = np.concatenate(values).astype(np.float64)
    return feature, threshold, left, right, value, offsets


def sqrt_features(m: int) -> int:
    return int(math.ceil(math.sqrt(m)))
