from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from typing import ClassVar

import numpy as np

from ..dataset import FlowTable
from ..errors import ArityError, SchemaError

BELOW_HALF = np.nextafter(0.5, 0.0)


def sigmoid(z) -> np.ndarray:
    """Logistic function with ``sigmoid(z) >= 0.5`` exactly when ``z >= 0``.

    Thresholding probabilities at 0.5 and margins at 0 therefore always
    agree, which lets compiled evaluators skip the exponential.
    """
    z = np.asarray(z, dtype=np.float64)
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    e = np.exp(z[~pos])
    out[~pos] = np.minimum(e / (1.0 + e), BELOW_HALF)
    return out


def training_digest(table: FlowTable, extra: str = "") -> str:
    h = hashlib.sha256()
    h.update("\x1f".join(table.feature_names).encode())
    h.update(np.ascontiguousarray(table.features).tobytes())
    h.update(np.ascontiguousarray(table.labels).tobytes())
    h.update(extra.encode())
    return h.hexdigest()


def feature_ids(names) -> np.ndarray:
    """Stable 64-bit identity per feature name; drives per-node feature sampling."""
    return np.array(
        [int.from_bytes(hashlib.blake2b(n.encode(), digest_size=8).digest(), "little") for n in names],
        dtype=np.uint64,
    )


@dataclass(eq=False, kw_only=True)
class Model:
    """Shared inference contract of every trained learner."""

    kind: ClassVar[str] = "model"

    feature_names: tuple[str, ...]
    hyperparameters: dict = field(default_factory=dict)
    training_digest: str = ""

    def _rows(self, rows) -> np.ndarray:
        if isinstance(rows, FlowTable):
            missing = [n for n in self.feature_names if n not in rows.feature_names]
            if missing:
                raise ArityError(f"table lacks model features {missing}; expected {list(self.feature_names)}")
            return rows.select(self.feature_names).features
        X = np.asarray(rows, dtype=np.float64)
        if X.ndim == 1:
            X = np.empty((0, len(self.feature_names))) if X.size == 0 else X.reshape(1, -1)
        if X.ndim != 2 or X.shape[1] != len(self.feature_names):
            raise ArityError(
                f"rows have {X.shape[-1]} columns; model expects {len(self.feature_names)}: "
                f"{list(self.feature_names)}"
            )
        return np.ascontiguousarray(X)

    def _proba(self, X: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def predict_proba(self, rows) -> np.ndarray:
        X = self._rows(rows)
        if X.shape[0] == 0:
            return np.empty(0, dtype=np.float64)
        return self._proba(X)

    def predict(self, rows) -> np.ndarray:
        return (self.predict_proba(rows) >= 0.5).astype(np.int64)


def predict(model: Model, rows) -> np.ndarray:
    return model.predict(rows)


def predict_proba(model: Model, rows) -> np.ndarray:
    return model.predict_proba(rows)


def require_rows(table: FlowTable, what: str) -> None:
    from ..errors import EmptyTableError

    if table.row_count == 0:
        raise EmptyTableError(f"{what}: training table is empty")


def require_both_classes(table: FlowTable, what: str) -> None:
    from ..errors import DataError

    require_rows(table, what)
    n0, n1 = table.class_counts()
    if n0 == 0 or n1 == 0:
        raise DataError(f"{what}: both classes must be present (benign={n0}, attack={n1})")


def check_same_features(a, b) -> None:
    if tuple(a) != tuple(b):
        raise SchemaError(f"feature mismatch: {list(a)} vs {list(b)}")
