from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from ..dataset import FlowTable, StandardizeStats
from ..errors import DataError
from . import _kernels as K
from .base import BELOW_HALF, Model, require_rows, training_digest

_CHUNK = 2048


def neighbors(train_z: np.ndarray, query_z: np.ndarray, k: int, n_jobs: int = 1):
    """Indices and Euclidean distances of the k nearest training rows, nearest first."""
    nq = query_z.shape[0]
    idx = np.zeros((nq, k), dtype=np.int64)
    d2 = np.zeros((nq, k), dtype=np.float64)
    train_z = np.ascontiguousarray(train_z)
    query_z = np.ascontiguousarray(query_z)

    def run(lo):
        hi = min(lo + _CHUNK, nq)
        K.knn_scan(train_z, query_z[lo:hi], k, idx[lo:hi], d2[lo:hi])

    starts = range(0, nq, _CHUNK)
    if n_jobs > 1:
        with ThreadPoolExecutor(max_workers=n_jobs) as pool:
            list(pool.map(run, starts))
    else:
        for lo in starts:
            run(lo)
    return idx, np.sqrt(d2)


@dataclass(eq=False, kw_only=True)
class KnnModel(Model):
    """Majority vote among the k nearest standardized training rows.

    P(Y=1) is the attack vote fraction. A split vote (even k) is decided by
    the smaller summed neighbor distance, then the lower label; the
    probability is nudged just below 0.5 when class 0 wins so that
    thresholding at 0.5 reproduces the vote.
    """

    kind = "knn"

    train_z: np.ndarray
    labels: np.ndarray
    k: int
    stats: StandardizeStats
    n_jobs: int = 1

    def _proba(self, X):
        idx, dist = neighbors(self.train_z, self.stats.apply(X), self.k, self.n_jobs)
        lab = self.labels[idx]
        votes1 = lab.sum(axis=1)
        proba = votes1 / self.k
        tie = 2 * votes1 == self.k
        if tie.any():
            d1 = np.where(lab == 1, dist, 0.0).sum(axis=1)
            d0 = np.where(lab == 0, dist, 0.0).sum(axis=1)
            proba = np.where(tie & ~(d1 < d0), BELOW_HALF, proba)
        return proba


def train_knn(train: FlowTable, k: int = 5) -> KnnModel:
    require_rows(train, "train_knn")
    if k < 1 or k > train.row_count:
        raise DataError(f"k={k} must be between 1 and the training row count {train.row_count}")
    stats = StandardizeStats.fit(train.features)
    return KnnModel(feature_names=train.feature_names, train_z=stats.apply(train.features),
                    labels=train.labels.copy(), k=k, stats=stats, hyperparameters={"k": k},
                    training_digest=training_digest(train, "knn"))
