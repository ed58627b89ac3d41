"""Versioned JSON model documents.

Layout: ``{format_version, learner_kind, feature_names, hyperparameters,
parameters, training_digest}`` plus an optional ``provenance`` block
recording the producing configuration. Keys are sorted and floats use Python's
shortest round-trip repr, so equal models serialize to identical bytes.
"""
from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from ..dataset import StandardizeStats
from ..errors import SchemaError
from .bayes import NaiveBayesModel
from .boosting import AdaBoostModel, GbtModel
from .forest import ForestModel
from .knn import KnnModel
from .linear import LogRegModel
from .tree import TreeModel

FORMAT_VERSION = 1
_TREE_KEYS = ("feature", "threshold", "left", "right", "value", "weight", "count", "impurity")


def _tree_params(t: TreeModel) -> dict:
    return {k: getattr(t, k).tolist() for k in _TREE_KEYS}


def _tree_from(params: dict, names) -> TreeModel:
    return TreeModel(feature_names=tuple(names), **{k: np.array(params[k]) for k in _TREE_KEYS})


def _opt_float(v):
    return None if v is None else float(v)


def model_to_dict(model, provenance: dict | None = None) -> dict:
    kind = model.kind
    if isinstance(model, TreeModel):
        params = _tree_params(model)
    elif isinstance(model, ForestModel):
        params = {"trees": [_tree_params(t) for t in model.trees], "vote_rule": model.vote_rule,
                  "oob_accuracy": _opt_float(model.oob_accuracy)}
    elif isinstance(model, AdaBoostModel):
        params = {"stumps": [_tree_params(t) for t in model.stumps], "alphas": model.alphas.tolist(),
                  "stage_errors": model.stage_errors.tolist(), "train_errors": model.train_errors.tolist(),
                  "exp_losses": model.exp_losses.tolist()}
    elif isinstance(model, GbtModel):
        params = {"trees": [_tree_params(t) for t in model.trees], "eta": float(model.eta),
                  "base_score": float(model.base_score), "train_loss": model.train_loss.tolist()}
    elif isinstance(model, LogRegModel):
        params = {"beta": model.beta.tolist(), "stats": model.stats.to_dict(), "iterations": model.iterations}
    elif isinstance(model, KnnModel):
        params = {"train_z": model.train_z.tolist(), "labels": model.labels.tolist(), "k": model.k,
                  "stats": model.stats.to_dict()}
    elif isinstance(model, NaiveBayesModel):
        params = {"priors": model.priors.tolist(), "means": model.means.tolist(),
                  "variances": model.variances.tolist()}
    else:
        raise TypeError(f"cannot serialize {type(model).__name__}")
    doc = {
        "format_version": FORMAT_VERSION,
        "learner_kind": kind,
        "feature_names": list(model.feature_names),
        "hyperparameters": model.hyperparameters,
        "parameters": params,
        "training_digest": model.training_digest,
    }
    if provenance is not None:
        doc["provenance"] = provenance
    return doc


def model_from_dict(doc: dict):
    if doc.get("format_version") != FORMAT_VERSION:
        raise SchemaError(f"unsupported model format_version {doc.get('format_version')!r}")
    names = tuple(doc["feature_names"])
    p = doc["parameters"]
    common = {"feature_names": names, "hyperparameters": doc.get("hyperparameters", {}),
              "training_digest": doc.get("training_digest", "")}
    kind = doc["learner_kind"]
    if kind == "tree":
        model = TreeModel(**common, **{k: np.array(p[k]) for k in _TREE_KEYS})
        model.validate()
    elif kind == "forest":
        model = ForestModel(**common, trees=[_tree_from(t, names) for t in p["trees"]],
                            vote_rule=p["vote_rule"], oob_accuracy=p.get("oob_accuracy"))
        for t in model.trees:
            t.validate()
    elif kind == "adaboost":
        model = AdaBoostModel(**common, stumps=[_tree_from(t, names) for t in p["stumps"]],
                              alphas=np.array(p["alphas"]), stage_errors=np.array(p["stage_errors"]),
                              train_errors=np.array(p["train_errors"]), exp_losses=np.array(p["exp_losses"]))
        for t in model.stumps:
            t.validate()
    elif kind == "gbt":
        model = GbtModel(**common, trees=[_tree_from(t, names) for t in p["trees"]], eta=p["eta"],
                         base_score=p["base_score"], train_loss=np.array(p["train_loss"]))
        for t in model.trees:
            t.validate()
    elif kind == "logreg":
        model = LogRegModel(**common, beta=np.array(p["beta"], dtype=np.float64),
                            stats=StandardizeStats.from_dict(p["stats"]), iterations=p.get("iterations", 0))
        if len(model.beta) != len(names) + 1:
            raise SchemaError("logreg coefficients do not match feature arity")
    elif kind == "knn":
        model = KnnModel(**common, train_z=np.array(p["train_z"], dtype=np.float64).reshape(-1, len(names)),
                         labels=np.array(p["labels"], dtype=np.int64), k=p["k"],
                         stats=StandardizeStats.from_dict(p["stats"]))
    elif kind == "naive_bayes":
        model = NaiveBayesModel(**common, priors=np.array(p["priors"]), means=np.array(p["means"]),
                                variances=np.array(p["variances"]))
        if model.means.shape != (2, len(names)):
            raise SchemaError("naive Bayes parameters do not match feature arity")
    else:
        raise SchemaError(f"unknown learner_kind {kind!r}")
    return model


def dumps_model(model, provenance: dict | None = None) -> str:
    return json.dumps(model_to_dict(model, provenance), sort_keys=True, separators=(",", ":")) + "\n"


def loads_model(text: str):
    return model_from_dict(json.loads(text))


def save_model(model, path, provenance: dict | None = None) -> None:
    from ..envelope import atomic_write_text

    atomic_write_text(path, dumps_model(model, provenance))


def load_model(path):
    return loads_model(Path(path).read_text(encoding="utf-8"))
