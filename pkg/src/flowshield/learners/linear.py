"""Logistic regression fitted by iteratively reweighted least squares."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..dataset import FlowTable, StandardizeStats
from ..errors import NonConvergenceError
from . import _kernels as K
from .base import Model, require_both_classes, sigmoid, training_digest


@dataclass
class LogRegConfig:
    l2: float = 1.0
    max_iter: int = 50
    tol: float = 1e-8
    jitter: float = 1e-8

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def with_intercept(Z: np.ndarray) -> np.ndarray:
    return np.column_stack([np.ones(Z.shape[0]), Z])


def _penalty(beta: np.ndarray, l2: float) -> np.ndarray:
    pen = l2 * beta
    pen[0] = 0.0
    return pen


def penalized_loglik(beta: np.ndarray, A: np.ndarray, y: np.ndarray, l2: float = 0.0) -> float:
    """Bernoulli log-likelihood minus (l2/2)||slopes||^2; ``A`` carries the intercept column."""
    eta = A @ beta
    return float(y @ eta - np.logaddexp(0.0, eta).sum() - 0.5 * l2 * np.dot(beta[1:], beta[1:]))


def loglik_gradient(beta: np.ndarray, A: np.ndarray, y: np.ndarray, l2: float = 0.0) -> np.ndarray:
    return A.T @ (y - sigmoid(A @ beta)) - _penalty(beta, l2)


@dataclass
class IrlsResult:
    beta: np.ndarray
    iterations: int
    converged: bool
    information: np.ndarray
    loglik: float
    weights: np.ndarray = field(repr=False, default=None)


def irls(A: np.ndarray, y: np.ndarray, l2: float = 0.0, max_iter: int = 50, tol: float = 1e-8,
         jitter: float = 1e-8) -> IrlsResult:
    """Newton-Raphson on the penalized log-likelihood with step halving.

    Each step solves (A'WA + l2 P + jitter I) d = gradient. Converged once
    max |d| < ``tol``. ``information`` is A'WA + l2 P at the final iterate
    (no jitter), i.e. the observed information.
    """
    p = A.shape[1]
    beta = np.zeros(p)
    obj = penalized_loglik(beta, A, y, l2)
    eye = np.eye(p)
    pen_diag = np.full(p, l2)
    pen_diag[0] = 0.0
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        prob = sigmoid(A @ beta)
        w = prob * (1.0 - prob)
        grad = A.T @ (y - prob) - _penalty(beta, l2)
        H = (A.T * w) @ A + np.diag(pen_diag) + jitter * eye
        step = np.linalg.solve(H, grad)
        t = 1.0
        new = beta + step
        new_obj = penalized_loglik(new, A, y, l2)
        halvings = 0
        while new_obj < obj and halvings < 30:
            t *= 0.5
            new = beta + t * step
            new_obj = penalized_loglik(new, A, y, l2)
            halvings += 1
        delta = new - beta
        beta, obj = new, new_obj
        if np.max(np.abs(delta)) < tol:
            converged = True
            break
    prob = sigmoid(A @ beta)
    w = prob * (1.0 - prob)
    info = (A.T * w) @ A + np.diag(pen_diag)
    return IrlsResult(beta, it, converged, info, obj, w)


@dataclass(eq=False, kw_only=True)
class LogRegModel(Model):
    """P(Y=1) = sigmoid(beta0 + sum_j beta_j z_j) on standardized features z."""

    kind = "logreg"

    beta: np.ndarray
    stats: StandardizeStats
    iterations: int = 0

    def margin(self, X: np.ndarray) -> np.ndarray:
        out = np.empty(X.shape[0], dtype=np.float64)
        K.linear_margin(X, np.arange(X.shape[1], dtype=np.int64), self.stats.means, self.stats.std_devs,
                        self.beta, out)
        return out

    def _proba(self, X):
        return sigmoid(self.margin(X))


def train_logreg(train: FlowTable, cfg: LogRegConfig = LogRegConfig()) -> LogRegModel:
    """L2-penalized logistic regression (intercept unpenalized) on standardized features.

    Raises:
        NonConvergenceError: IRLS did not converge within ``cfg.max_iter``;
            ``last_iterate`` carries the final coefficients.
    """
    require_both_classes(train, "train_logreg")
    stats = StandardizeStats.fit(train.features)
    A = with_intercept(stats.apply(train.features))
    y = train.labels.astype(np.float64)
    res = irls(A, y, l2=cfg.l2, max_iter=cfg.max_iter, tol=cfg.tol, jitter=cfg.jitter)
    if not res.converged:
        raise NonConvergenceError(f"IRLS did not converge in {cfg.max_iter} iterations",
                                  last_iterate=res.beta, iterations=res.iterations)
    return LogRegModel(feature_names=train.feature_names, beta=res.beta, stats=stats,
                       iterations=res.iterations, hyperparameters=cfg.to_dict(),
                       training_digest=training_digest(train, "logreg"))
