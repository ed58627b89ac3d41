"""Discrete AdaBoost over Gini stumps and second-order gradient-boosted trees."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..dataset import FlowTable
from ..errors import UnlearnableError
from . import _kernels as K
from .base import Model, feature_ids, require_both_classes, sigmoid, training_digest
from .tree import TreeModel, concat_trees, grow

ERR_CLAMP = 1e-10


def stage_weight(err: float) -> float:
    """AdaBoost stage weight 1/2 ln((1 - err) / err)."""
    return 0.5 * math.log((1.0 - err) / err)


@dataclass(eq=False, kw_only=True)
class AdaBoostModel(Model):
    """Weighted vote of stumps; P(Y=1) is the alpha-weighted share of attack votes."""

    kind = "adaboost"

    stumps: list[TreeModel]
    alphas: np.ndarray
    stage_errors: np.ndarray = field(default=None)
    train_errors: np.ndarray = field(default=None)
    exp_losses: np.ndarray = field(default=None)
    _flat: tuple | None = field(default=None, repr=False)

    def __post_init__(self):
        self.alphas = np.asarray(self.alphas, dtype=np.float64)
        for name in ("stage_errors", "train_errors", "exp_losses"):
            v = getattr(self, name)
            setattr(self, name, np.zeros(0) if v is None else np.asarray(v, dtype=np.float64))

    def vote_values(self) -> list[np.ndarray]:
        return [a * np.where(s.value >= 0.5, 1.0, -1.0) for s, a in zip(self.stumps, self.alphas)]

    def flat(self):
        if self._flat is None:
            self._flat = concat_trees(self.stumps, self.vote_values())
        return self._flat

    def margin(self, X: np.ndarray) -> np.ndarray:
        feature, threshold, left, right, value, roots = self.flat()
        out = np.empty(X.shape[0], dtype=np.float64)
        K.ensemble_sum(feature, threshold, left, right, value, roots, X, out)
        return out

    def _proba(self, X):
        total = float(self.alphas.sum())
        return np.clip(0.5 * (1.0 + self.margin(X) / total), 0.0, 1.0)


def train_adaboost(train: FlowTable, rounds: int = 50) -> AdaBoostModel:
    """Discrete AdaBoost with depth-1 trees fit to the reweighted sample.

    Stops early once a stump's weighted error reaches 0.5, or after a
    perfect stump (its error clamped to ``ERR_CLAMP`` for a finite weight).

    Raises:
        UnlearnableError: the first stump already has error >= 0.5.
    """
    require_both_classes(train, "train_adaboost")
    X = train.features
    n = X.shape[0]
    y = train.labels.astype(np.float64)
    ypm = 2.0 * y - 1.0
    Xt = np.ascontiguousarray(X.T)
    presorted = K.presort(Xt, np.arange(n, dtype=np.int64))
    fids = feature_ids(train.feature_names)
    ones = np.ones(n)
    w = np.full(n, 1.0 / n)
    F = np.zeros(n)

    stumps, alphas, errors, train_errors, exp_losses = [], [], [], [], []
    for t in range(rounds):
        arrays = grow(X, w, w * y, cnt=ones, max_depth=1, fids=fids, presorted=presorted, Xt=Xt)
        stump = TreeModel(feature_names=train.feature_names, **arrays)
        h = np.where(stump.raw(X) >= 0.5, 1.0, -1.0)
        err = float(np.sum(w[h != ypm]))
        if err >= 0.5:
            if t == 0:
                raise UnlearnableError(f"unlearnable under stumps: first stump error {err:.6f} >= 0.5")
            break
        err = max(err, ERR_CLAMP)
        alpha = stage_weight(err)
        stumps.append(stump)
        alphas.append(alpha)
        errors.append(err)
        F = F + alpha * h
        train_errors.append(float(np.mean(np.where(F >= 0, 1.0, 0.0) != y)))
        exp_losses.append(float(np.mean(np.exp(-ypm * F))))
        if err <= ERR_CLAMP:
            break
        w = w * np.exp(-alpha * ypm * h)
        w = w / w.sum()

    return AdaBoostModel(feature_names=train.feature_names, stumps=stumps, alphas=np.array(alphas),
                         stage_errors=np.array(errors), train_errors=np.array(train_errors),
                         exp_losses=np.array(exp_losses), hyperparameters={"rounds": rounds},
                         training_digest=training_digest(train, "adaboost"))


@dataclass
class GbtConfig:
    rounds: int = 100
    max_depth: int = 6
    eta: float = 0.3
    l2: float = 1.0
    gamma: float = 0.0
    min_child_weight: float = 1.0

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def newton_leaf_weight(G: float, H: float, lam: float) -> float:
    return -G / (H + lam)


def split_gain(GL: float, HL: float, GR: float, HR: float, lam: float, gamma: float = 0.0) -> float:
    G, H = GL + GR, HL + HR
    return 0.5 * (GL * GL / (HL + lam) + GR * GR / (HR + lam) - G * G / (H + lam)) - gamma


def logloss(y: np.ndarray, raw: np.ndarray) -> float:
    """Mean Bernoulli negative log-likelihood of margins ``raw``."""
    return float(np.mean(np.where(y > 0.5, np.logaddexp(0.0, -raw), np.logaddexp(0.0, raw))))


@dataclass(eq=False, kw_only=True)
class GbtModel(Model):
    """Additive logistic model: raw = base_score + eta * sum of tree leaf weights."""

    kind = "gbt"

    trees: list[TreeModel]
    eta: float
    base_score: float
    train_loss: np.ndarray = field(default=None)
    _flat: tuple | None = field(default=None, repr=False)

    def __post_init__(self):
        self.train_loss = np.zeros(0) if self.train_loss is None else np.asarray(self.train_loss, np.float64)

    def flat(self):
        if self._flat is None and self.trees:
            self._flat = concat_trees(self.trees)
        return self._flat

    def raw(self, X: np.ndarray) -> np.ndarray:
        acc = np.zeros(X.shape[0], dtype=np.float64)
        if self.trees:
            feature, threshold, left, right, value, roots = self.flat()
            K.ensemble_sum(feature, threshold, left, right, value, roots, X, acc)
        return self.base_score + self.eta * acc

    def _proba(self, X):
        return sigmoid(self.raw(X))


def train_gbt(train: FlowTable, cfg: GbtConfig = GbtConfig()) -> GbtModel:
    """Boost regression trees on the logistic loss using gradient and hessian sums.

    The base score is the logit of the training attack fraction; each round
    fits a tree to (g, h) = (p - y, p(1 - p)) with exact greedy splits.
    ``train_loss[r]`` is the training log-loss after ``r`` rounds.
    """
    require_both_classes(train, "train_gbt")
    X = train.features
    n = X.shape[0]
    y = train.labels.astype(np.float64)
    frac = float(y.mean())
    base = math.log(frac / (1.0 - frac))
    Xt = np.ascontiguousarray(X.T)
    presorted = K.presort(Xt, np.arange(n, dtype=np.int64))
    ones = np.ones(n)
    F = np.full(n, base)
    losses = [logloss(y, F)]
    trees = []
    leaf_buf = np.empty(n, dtype=np.int64)
    for _ in range(cfg.rounds):
        p = sigmoid(F)
        g = p - y
        h = p * (1.0 - p)
        arrays = grow(X, h, g, criterion=K.NEWTON, cnt=ones, max_depth=cfg.max_depth,
                      min_child_weight=cfg.min_child_weight, lam=cfg.l2, gamma=cfg.gamma,
                      presorted=presorted, Xt=Xt)
        tree = TreeModel(feature_names=train.feature_names, **arrays)
        K.leaf_ids(tree.feature, tree.threshold, tree.left, tree.right, 0, X, leaf_buf)
        F = F + cfg.eta * tree.value[leaf_buf]
        trees.append(tree)
        losses.append(logloss(y, F))
    return GbtModel(feature_names=train.feature_names, trees=trees, eta=cfg.eta, base_score=base,
                    train_loss=np.array(losses), hyperparameters=cfg.to_dict(),
                    training_digest=training_digest(train, "gbt"))
