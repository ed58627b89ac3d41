"""Classifiers trained from first principles on ``FlowTable`` data.

``train(name, table, cfg)`` dispatches on the short learner names used by
the CLI: nb, knn, logreg, cart, rf, ada, gbt.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass, field

from ..dataset import FlowTable
from .base import Model, predict, predict_proba, sigmoid
from .bayes import NaiveBayesModel, train_gaussian_nb
from .boosting import AdaBoostModel, GbtConfig, GbtModel, train_adaboost, train_gbt
from .forest import ForestConfig, ForestModel, train_random_forest
from .io import dumps_model, load_model, loads_model, model_from_dict, model_to_dict, save_model
from .knn import KnnModel, train_knn
from .linear import LogRegConfig, LogRegModel, train_logreg
from .tree import CartConfig, TreeModel, train_cart

LEARNERS = ("nb", "knn", "logreg", "cart", "rf", "ada", "gbt")


@dataclass
class TrainConfig:
    """Hyperparameters of every learner; defaults are conventional choices."""

    knn_k: int = 5
    nb_eps: float = 1e-9
    ada_rounds: int = 50
    cart: CartConfig = field(default_factory=CartConfig)
    forest: ForestConfig = field(default_factory=ForestConfig)
    gbt: GbtConfig = field(default_factory=GbtConfig)
    logreg: LogRegConfig = field(default_factory=LogRegConfig)
    seed: int = 42
    n_jobs: int = 1

    def to_dict(self) -> dict:
        return asdict(self)


def train(name: str, table: FlowTable, cfg: TrainConfig | None = None) -> Model:
    cfg = cfg or TrainConfig()
    if name == "nb":
        return train_gaussian_nb(table, cfg.nb_eps)
    if name == "knn":
        model = train_knn(table, cfg.knn_k)
        model.n_jobs = cfg.n_jobs
        return model
    if name == "logreg":
        return train_logreg(table, cfg.logreg)
    if name == "cart":
        return train_cart(table, cfg.cart)
    if name == "rf":
        fcfg = ForestConfig(**{**asdict(cfg.forest), "seed": cfg.seed, "n_jobs": cfg.n_jobs})
        return train_random_forest(table, fcfg)
    if name == "ada":
        return train_adaboost(table, cfg.ada_rounds)
    if name == "gbt":
        return train_gbt(table, cfg.gbt)
    raise ValueError(f"unknown learner {name!r}; choose from {', '.join(LEARNERS)}")


__all__ = [
    "AdaBoostModel", "CartConfig", "ForestConfig", "ForestModel", "GbtConfig", "GbtModel", "KnnModel",
    "LEARNERS", "LogRegConfig", "LogRegModel", "Model", "NaiveBayesModel", "TrainConfig", "TreeModel",
    "dumps_model", "load_model", "loads_model", "model_from_dict", "model_to_dict", "predict",
    "predict_proba", "save_model", "sigmoid", "train", "train_adaboost", "train_cart", "train_gaussian_nb",
    "train_gbt", "train_knn", "train_logreg", "train_random_forest",
]
