"""Class rebalancing: SMOTE oversampling and random majority undersampling.

SMOTE rows are ``x + u * (x_nn - x)`` where ``x`` is a minority row,
``x_nn`` one of its ``k`` nearest minority neighbours and ``u ~ U[0, 1)``.
Each minority row owns a generator seeded from ``(seed, row index)`` so the
synthetic rows do not depend on how the work is split across threads.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .dataset import FlowTable, StandardizeStats
from .errors import DataError
from .learners.knn import neighbors

RAW = "raw"
STANDARDIZED = "standardized"


@dataclass(frozen=True)
class SmoteConfig:
    """SMOTE parameters.

    Attributes:
        k_neighbors: Neighbours considered per minority row.
        target_minority_fraction: Desired minority share of the output, in (0, 0.5].
        seed: Root seed of every per-row generator.
        space: ``"raw"`` searches neighbours on raw values, ``"standardized"``
            on z-scores (interpolation always happens on raw values).
    """

    k_neighbors: int = 5
    target_minority_fraction: float = 0.5
    seed: int = 42
    space: str = RAW

    def __post_init__(self):
        if self.k_neighbors < 1:
            raise ValueError("k_neighbors must be >= 1")
        if not 0.0 < self.target_minority_fraction <= 0.5:
            raise ValueError("target_minority_fraction must lie in (0, 0.5]")
        if self.space not in (RAW, STANDARDIZED):
            raise ValueError(f"space must be {RAW!r} or {STANDARDIZED!r}")

    def to_dict(self) -> dict:
        return dict(self.__dict__)


@dataclass
class SmoteProvenance:
    """Per synthetic row: source row, neighbour row (indices into the input) and ``u``."""

    source: np.ndarray
    neighbor: np.ndarray
    u: np.ndarray

    def to_dict(self) -> dict:
        return {"source": self.source.tolist(), "neighbor": self.neighbor.tolist(), "u": self.u.tolist()}


@dataclass
class ResampleReport:
    minority_before: int
    majority_before: int
    synthetic_added: int = 0
    rows_removed: int = 0
    resulting_fraction: float = 0.0
    minority_label: int = 1
    provenance: SmoteProvenance | None = field(default=None, repr=False)
    kept_rows: np.ndarray | None = field(default=None, repr=False)

    def to_dict(self, include_provenance: bool = False) -> dict:
        d = {
            "minority_before": self.minority_before,
            "majority_before": self.majority_before,
            "minority_label": self.minority_label,
            "synthetic_added": self.synthetic_added,
            "rows_removed": self.rows_removed,
            "resulting_fraction": self.resulting_fraction,
        }
        if include_provenance and self.provenance is not None:
            d["provenance"] = self.provenance.to_dict()
        return d


def _split_classes(table: FlowTable, what: str):
    n0, n1 = table.class_counts()
    if n0 == 0 or n1 == 0:
        raise DataError(f"{what}: both classes must be present (benign={n0}, attack={n1})")
    minority = 1 if n1 <= n0 else 0
    return minority, min(n0, n1), max(n0, n1)


def synthetic_count(minority: int, majority: int, target: float) -> int:
    """Rows to add so the minority share is as close as possible to ``target``."""
    want = int(np.floor(target * majority / (1.0 - target) + 0.5))
    return max(0, want - minority)


def _allocate(n_minority: int, total: int, seed: int) -> np.ndarray:
    reps = np.full(n_minority, total // n_minority, dtype=np.int64)
    extra = total % n_minority
    if extra:
        chosen = np.random.default_rng([seed, 0xA110C]).choice(n_minority, size=extra, replace=False)
        reps[chosen] += 1
    return reps


def smote(table: FlowTable, cfg: SmoteConfig = SmoteConfig(), n_jobs: int = 1) -> tuple[FlowTable, ResampleReport]:
    """Oversample the minority class up to ``cfg.target_minority_fraction``.

    The output holds the input rows verbatim and in order, followed by the
    synthetic rows ordered by source row and then replica number. A table
    whose minority share already meets the target comes back unchanged.

    Raises:
        DataError: a class is empty, or the minority has no more than
            ``k_neighbors`` rows.
    """
    minority, m, M = _split_classes(table, "smote")
    report = ResampleReport(minority_before=m, majority_before=M, minority_label=minority)
    s = synthetic_count(m, M, cfg.target_minority_fraction)
    if s == 0:
        report.resulting_fraction = m / table.row_count
        report.provenance = SmoteProvenance(np.zeros(0, np.int64), np.zeros(0, np.int64), np.zeros(0))
        return table, report
    if m <= cfg.k_neighbors:
        raise DataError(
            f"smote: minority class has {m} rows, need more than k_neighbors={cfg.k_neighbors}; "
            "use a smaller k"
        )

    rows = np.flatnonzero(table.labels == minority)
    Xmin = np.ascontiguousarray(table.features[rows])
    space = Xmin if cfg.space == RAW else StandardizeStats.fit(Xmin).apply(Xmin)
    # k + 1 neighbours including the row itself; drop self (or, among exact
    # duplicates at distance 0, whichever copy is listed last).
    nn_all, _ = neighbors(space, space, cfg.k_neighbors + 1, n_jobs)
    nn = np.empty((m, cfg.k_neighbors), dtype=np.int64)
    for i in range(m):
        cand = nn_all[i]
        hit = np.flatnonzero(cand == i)
        drop = hit[0] if hit.size else cfg.k_neighbors
        nn[i] = np.delete(cand, drop)

    reps = _allocate(m, s, cfg.seed)
    offsets = np.concatenate([[0], np.cumsum(reps)])
    src = np.repeat(np.arange(m), reps)
    nbr = np.empty(s, dtype=np.int64)
    u = np.empty(s, dtype=np.float64)

    def draw(i):
        r = int(reps[i])
        if r == 0:
            return
        rng = np.random.default_rng([cfg.seed, int(rows[i])])
        lo = offsets[i]
        nbr[lo:lo + r] = nn[i, rng.integers(0, cfg.k_neighbors, size=r)]
        u[lo:lo + r] = rng.random(r)

    if n_jobs > 1:
        with ThreadPoolExecutor(max_workers=n_jobs) as pool:
            list(pool.map(draw, range(m)))
    else:
        for i in range(m):
            draw(i)

    x = Xmin[src]
    synth = x + u[:, None] * (Xmin[nbr] - x)
    features = np.vstack([table.features, synth])
    labels = np.concatenate([table.labels, np.full(s, minority, dtype=np.int64)])
    raw = None
    if table.raw_labels is not None:
        raw = np.concatenate([table.raw_labels, table.raw_labels[rows[src]]])
    out = FlowTable(features=features, labels=labels, schema=table.schema, raw_labels=raw)
    report.synthetic_added = s
    report.resulting_fraction = (m + s) / out.row_count
    report.provenance = SmoteProvenance(rows[src], rows[nbr], u)
    return out, report


def random_undersample(table: FlowTable, majority_keep_fraction: float,
                       seed: int = 42) -> tuple[FlowTable, ResampleReport]:
    """Keep ``round(majority * fraction)`` majority rows chosen without replacement.

    Surviving rows keep their original relative order; minority rows are
    untouched. ``report.kept_rows`` lists the retained input indices.

    Raises:
        DataError: the fraction is outside (0, 1], a class is empty, or no
            majority row would remain.
    """
    if not 0.0 < majority_keep_fraction <= 1.0:
        raise DataError(f"majority_keep_fraction must lie in (0, 1], got {majority_keep_fraction}")
    minority, m, M = _split_classes(table, "random_undersample")
    majority = 1 - minority
    keep_n = int(np.floor(M * majority_keep_fraction + 0.5))
    if keep_n == 0:
        raise DataError(f"keeping {majority_keep_fraction} of {M} majority rows leaves none")
    maj_rows = np.flatnonzero(table.labels == majority)
    rng = np.random.default_rng([seed, 0x0DE5])
    chosen = np.sort(rng.choice(maj_rows, size=keep_n, replace=False)) if keep_n < M else maj_rows
    mask = table.labels != majority
    mask[chosen] = True
    kept = np.flatnonzero(mask)
    out = table.take(kept) if keep_n < M else table
    report = ResampleReport(minority_before=m, majority_before=M, minority_label=minority,
                            rows_removed=M - keep_n, resulting_fraction=m / (m + keep_n), kept_rows=kept)
    return out, report
