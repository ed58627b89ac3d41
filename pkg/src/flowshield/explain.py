"""Model interpretability: individual conditional expectation (ICE) curves,
partial dependence, and surrogate decision trees distilled from any model."""
from __future__ import annotations

from collections.abc import Sequence
from dataclasses import dataclass, field

import numpy as np

from .dataset import FlowTable
from .errors import DataError, SchemaError
from .learners import CartConfig, train_cart
from .learners.base import Model, feature_ids, training_digest
from .learners.tree import TreeModel, grow

DEFAULT_QUANTILES = 20
DEFAULT_MAX_ROWS = 10_000
DEFAULT_DEPTH_CAP = 3


@dataclass
class IceCurves:
    """``curves[i, j]`` is P(Y=1) for instance ``rows[i]`` with the feature set to ``grid[j]``."""

    feature: str
    grid: np.ndarray
    curves: np.ndarray
    pdp: np.ndarray
    rows: np.ndarray = field(repr=False, default=None)

    def to_dict(self) -> dict:
        return {"feature": self.feature, "grid": self.grid.tolist(), "pdp": self.pdp.tolist(),
                "rows": None if self.rows is None else self.rows.tolist(), "curves": self.curves.tolist()}

    def to_text(self) -> str:
        """Whitespace-separated columns: grid value, pdp, then one column per instance."""
        head = ["grid", "pdp"] + [f"row_{int(r)}" for r in self.rows]
        lines = [" ".join(head)]
        for j, g in enumerate(self.grid):
            vals = [repr(float(g)), repr(float(self.pdp[j]))] + [repr(float(v)) for v in self.curves[:, j]]
            lines.append(" ".join(vals))
        return "\n".join(lines) + "\n"


def default_grid(values: np.ndarray, n_quantiles: int = DEFAULT_QUANTILES) -> np.ndarray:
    """``{0, 1}`` for a 0/1 feature, otherwise the distinct empirical quantiles."""
    uniq = np.unique(values)
    if uniq.size <= 2 and np.isin(uniq, (0.0, 1.0)).all():
        return np.array([0.0, 1.0])
    return np.unique(np.quantile(values, np.linspace(0.0, 1.0, n_quantiles)))


def ice(model: Model, table: FlowTable, feature: str, grid: Sequence[float] | None = None,
        n_quantiles: int = DEFAULT_QUANTILES, max_rows: int | None = DEFAULT_MAX_ROWS,
        seed: int = 42) -> IceCurves:
    """ICE curves of ``feature`` and their mean, the partial dependence.

    Tables above ``max_rows`` are subsampled without replacement (seeded);
    curves follow the input row order.

    Raises:
        SchemaError: the model does not use ``feature``.
        DataError: an explicit grid is not strictly ascending.
    """
    if feature not in model.feature_names:
        raise SchemaError(f"unknown feature {feature!r}; model uses {list(model.feature_names)}")
    X = table.select(model.feature_names).features
    rows = np.arange(X.shape[0])
    if max_rows is not None and X.shape[0] > max_rows:
        rng = np.random.default_rng([seed, 0x1CE])
        rows = np.sort(rng.choice(X.shape[0], size=max_rows, replace=False))
        X = X[rows]
    j = model.feature_names.index(feature)
    if grid is None:
        grid_arr = default_grid(X[:, j], n_quantiles)
    else:
        grid_arr = np.asarray(grid, dtype=np.float64)
        if grid_arr.ndim != 1 or grid_arr.size == 0 or np.any(np.diff(grid_arr) <= 0):
            raise DataError("ICE grid must be a nonempty strictly ascending sequence")
    curves = np.empty((X.shape[0], grid_arr.size))
    work = np.array(X, dtype=np.float64)
    for g, v in enumerate(grid_arr):
        work[:, j] = v
        curves[:, g] = model.predict_proba(work)
    pdp = curves.mean(axis=0) if X.shape[0] else np.full(grid_arr.size, np.nan)
    return IceCurves(feature, grid_arr, curves, pdp, rows)


@dataclass
class SurrogateResult:
    tree: TreeModel
    fidelity: float
    depth_cap: int
    soft: bool = False

    def to_dict(self) -> dict:
        t = self.tree
        return {"fidelity": self.fidelity, "depth_cap": self.depth_cap, "soft": self.soft,
                "depth": t.depth(), "root_feature": None if t.feature[0] < 0 else t.feature_names[t.feature[0]],
                "root_threshold": None if t.feature[0] < 0 else float(t.threshold[0])}


def surrogate_tree(model: Model, table: FlowTable, depth_cap: int = DEFAULT_DEPTH_CAP,
                   soft: bool = False) -> SurrogateResult:
    """Fit a depth-capped CART to the model's predictions on ``table``.

    By default the tree learns the model's hard labels; ``soft=True`` makes
    it learn predicted probabilities instead. Fidelity is the fraction of
    rows where tree and model labels agree.
    """
    if table.row_count == 0:
        raise DataError("surrogate_tree needs a nonempty table")
    X = table.select(model.feature_names)
    hard = model.predict(X)
    if soft:
        target = model.predict_proba(X)
        arrays = grow(X.features, np.ones(X.row_count), target, max_depth=depth_cap,
                      fids=feature_ids(model.feature_names))
        tree = TreeModel(feature_names=model.feature_names, hyperparameters={"max_depth": depth_cap, "soft": True},
                         training_digest=training_digest(X, "surrogate-soft"), **arrays)
    else:
        distill = FlowTable.from_arrays(X.features, hard, model.feature_names)
        tree = train_cart(distill, CartConfig(max_depth=depth_cap))
    fidelity = float(np.mean(tree.predict(X) == hard))
    return SurrogateResult(tree, fidelity, depth_cap, soft)


def describe_tree(tree: TreeModel, precision: int = 4) -> str:
    """Indented if/else listing of a tree."""
    lines = []

    def walk(node: int, depth: int):
        pad = "  " * depth
        if tree.feature[node] < 0:
            lines.append(f"{pad}leaf: P(attack)={tree.value[node]:.{precision}f} (n={tree.count[node]:g})")
            return
        name = tree.feature_names[tree.feature[node]]
        thr = f"{tree.threshold[node]:.{precision}g}"
        lines.append(f"{pad}if {name} <= {thr}:")
        walk(int(tree.left[node]), depth + 1)
        lines.append(f"{pad}else:  # {name} > {thr}")
        walk(int(tree.right[node]), depth + 1)

    walk(0, 0)
    return "\n".join(lines) + "\n"
