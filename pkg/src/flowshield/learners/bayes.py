from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..dataset import FlowTable
from .base import Model, require_both_classes, sigmoid, training_digest


@dataclass(eq=False, kw_only=True)
class NaiveBayesModel(Model):
    """Gaussian naive Bayes; rows of ``means``/``variances`` are classes 0 and 1."""

    kind = "naive_bayes"

    priors: np.ndarray
    means: np.ndarray
    variances: np.ndarray

    def log_joint(self, X: np.ndarray) -> np.ndarray:
        """log P(Y=c) + sum_j log N(x_j; mu_cj, var_cj) for c in {0, 1}."""
        out = np.empty((X.shape[0], 2))
        for c in (0, 1):
            var = self.variances[c]
            ll = -0.5 * np.log(2.0 * np.pi * var) - 0.5 * (X - self.means[c]) ** 2 / var
            out[:, c] = np.log(self.priors[c]) + ll.sum(axis=1)
        return out

    def log_odds(self, X: np.ndarray) -> np.ndarray:
        """log P(Y=1 | x) - log P(Y=0 | x), accumulated feature by feature.

        Subtracting per feature keeps the result accurate when both classes
        sit at the smoothing floor and each log density is huge. Equal
        variances use the factored form (m1 - m0)(2x - m0 - m1) / (2 var),
        which cancels exactly when the class means coincide.
        """
        m0, m1 = self.means
        v0, v1 = self.variances
        same = v0 == v1
        general = (-0.5 * np.log(v1 / v0) - 0.5 * (X - m1) ** 2 / v1 + 0.5 * (X - m0) ** 2 / v0)
        factored = (m1 - m0) * (2.0 * X - m0 - m1) / (2.0 * v0)
        terms = np.where(same, factored, general)
        return np.log(self.priors[1] / self.priors[0]) + terms.sum(axis=1)

    def _proba(self, X):
        return sigmoid(self.log_odds(X))


def train_gaussian_nb(train: FlowTable, eps: float = 1e-9) -> NaiveBayesModel:
    """Empirical priors, per-class means and population variances.

    Every variance is increased by ``eps`` times the largest overall feature
    variance (``eps`` itself when all features are constant).
    """
    require_both_classes(train, "train_gaussian_nb")
    X = train.features
    y = train.labels
    max_var = float(X.var(axis=0).max()) if X.shape[1] else 0.0
    smooth = eps * max_var if max_var > 0 else eps
    priors = np.array([np.mean(y == 0), np.mean(y == 1)])
    means = np.vstack([X[y == c].mean(axis=0) for c in (0, 1)])
    variances = np.vstack([X[y == c].var(axis=0) for c in (0, 1)]) + smooth
    return NaiveBayesModel(feature_names=train.feature_names, priors=priors, means=means,
                           variances=variances, hyperparameters={"eps": eps},
                           training_digest=training_digest(train, "naive_bayes"))
