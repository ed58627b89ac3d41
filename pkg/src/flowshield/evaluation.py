"""Stratified splitting, confusion-matrix metrics and the learner x feature-count
benchmark grid.

The positive class is 1 (attack). Metrics with a zero denominator are
``None`` and render as ``UNDEFINED`` in text tables.
"""
from __future__ import annotations

import time
from collections.abc import Sequence
from dataclasses import dataclass, field

import numpy as np

from .dataset import FlowTable
from .errors import DataError
from .featsel import FeatureSubset
from .learners import LEARNERS, TrainConfig, train
from .resample import SmoteConfig, smote

UNDEFINED = "\u2014"

LEARNER_TITLES = {
    "nb": "Naive Bayes",
    "knn": "KNN",
    "logreg": "Logistic Regression",
    "cart": "Decision Tree",
    "rf": "Random Forest",
    "ada": "AdaBoost",
    "gbt": "Gradient Boosting",
}


# ---------------------------------------------------------------- splitting

@dataclass(frozen=True)
class SplitConfig:
    test_fraction: float = 0.2
    seed: int = 42

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def stratified_indices(labels, test_fraction: float = 0.2, seed: int = 42) -> tuple[np.ndarray, np.ndarray]:
    """Train and test row indices (each ascending) holding class proportions.

    Each class contributes ``round(n_c * test_fraction)`` test rows, kept
    between 1 and ``n_c - 1``.

    Raises:
        DataError: the fraction is outside (0, 1) or a class has < 2 rows.
    """
    labels = np.asarray(labels)
    if not 0.0 < test_fraction < 1.0:
        raise DataError(f"test_fraction must lie in (0, 1), got {test_fraction}")
    rng = np.random.default_rng([seed, 0x5711])
    test_parts = []
    for cls in (0, 1):
        rows = np.flatnonzero(labels == cls)
        n = rows.size
        if n < 2:
            raise DataError(f"class {cls} has {n} rows; stratified split needs at least 2")
        t = min(max(int(np.floor(n * test_fraction + 0.5)), 1), n - 1)
        test_parts.append(rows[rng.permutation(n)[:t]])
    test = np.sort(np.concatenate(test_parts))
    mask = np.ones(labels.size, dtype=bool)
    mask[test] = False
    return np.flatnonzero(mask), test


def stratified_split(table: FlowTable, test_fraction: float = 0.2, seed: int = 42) -> tuple[FlowTable, FlowTable]:
    train_idx, test_idx = stratified_indices(table.labels, test_fraction, seed)
    return table.take(train_idx), table.take(test_idx)


# ---------------------------------------------------------------- metrics

@dataclass(frozen=True)
class ConfusionMatrix:
    tp: int
    fp: int
    tn: int
    fn: int

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn

    def __add__(self, other: "ConfusionMatrix") -> "ConfusionMatrix":
        return ConfusionMatrix(self.tp + other.tp, self.fp + other.fp, self.tn + other.tn, self.fn + other.fn)

    def to_dict(self) -> dict:
        return {"TP": self.tp, "FP": self.fp, "TN": self.tn, "FN": self.fn}


def confusion(y_true, y_pred) -> ConfusionMatrix:
    """Count outcomes with attack (1) as the positive class.

    Raises:
        DataError: lengths differ or a value is not 0/1.
    """
    t = np.asarray(y_true)
    p = np.asarray(y_pred)
    if t.shape != p.shape or t.ndim != 1:
        raise DataError(f"y_true and y_pred must be equal-length vectors ({t.shape} vs {p.shape})")
    if not (np.isin(t, (0, 1)).all() and np.isin(p, (0, 1)).all()):
        raise DataError("labels must be 0 or 1")
    t = t.astype(bool)
    p = p.astype(bool)
    tp = int(np.count_nonzero(t & p))
    fp = int(np.count_nonzero(~t & p))
    fn = int(np.count_nonzero(t & ~p))
    return ConfusionMatrix(tp, fp, t.size - tp - fp - fn, fn)


def _ratio(num: int, den: int) -> float | None:
    return None if den == 0 else num / den


@dataclass(frozen=True)
class MetricsReport:
    accuracy: float | None
    precision: float | None
    recall: float | None
    f1: float | None
    confusion: ConfusionMatrix

    def to_dict(self) -> dict:
        return {"accuracy": self.accuracy, "precision": self.precision, "recall": self.recall,
                "f1": self.f1, "confusion": self.confusion.to_dict()}


def metrics(cm: ConfusionMatrix) -> MetricsReport:
    """Accuracy, precision, recall and F1; zero denominators give ``None``.

    Raises:
        DataError: the matrix is empty.
    """
    if cm.total == 0:
        raise DataError("cannot compute metrics of an empty confusion matrix")
    precision = _ratio(cm.tp, cm.tp + cm.fp)
    recall = _ratio(cm.tp, cm.tp + cm.fn)
    f1 = None
    if precision is not None and recall is not None and precision + recall > 0:
        f1 = 2.0 * precision * recall / (precision + recall)
    return MetricsReport((cm.tp + cm.tn) / cm.total, precision, recall, f1, cm)


def format_percent(v: float | None) -> str:
    return UNDEFINED if v is None else f"{100.0 * v:.5f}"


def format_ratio(v: float | None) -> str:
    return UNDEFINED if v is None else f"{v:.2f}"


def report_cells(report: MetricsReport) -> dict[str, str]:
    """Accuracy (percent, 5 decimals), precision and recall (2 decimals), FN count."""
    return {"Accuracy": format_percent(report.accuracy), "Precision": format_ratio(report.precision),
            "Recall": format_ratio(report.recall), "FN": str(report.confusion.fn)}


# ---------------------------------------------------------------- benchmark

@dataclass
class BenchmarkRow:
    learner: str
    feature_count: int
    features: tuple[str, ...]
    metrics: MetricsReport | None = None
    error: str | None = None
    train_seconds: float | None = None
    predict_seconds_per_row: float | None = None

    def to_dict(self, include_timings: bool = True) -> dict:
        d = {"learner": self.learner, "feature_count": self.feature_count, "features": list(self.features),
             "metrics": None if self.metrics is None else self.metrics.to_dict(), "error": self.error}
        if include_timings:
            d["train_seconds"] = self.train_seconds
            d["predict_seconds_per_row"] = self.predict_seconds_per_row
        return d


@dataclass
class BenchmarkTable:
    rows: list[BenchmarkRow]
    split: SplitConfig
    smote: SmoteConfig | None = None
    train_rows: int = 0
    test_rows: int = 0
    synthetic_rows: int = 0
    meta: dict = field(default_factory=dict)

    def cell(self, learner: str, feature_count: int) -> BenchmarkRow:
        for r in self.rows:
            if r.learner == learner and r.feature_count == feature_count:
                return r
        raise KeyError((learner, feature_count))

    def to_dict(self, include_timings: bool = False) -> dict:
        return {
            "split": self.split.to_dict(),
            "smote": None if self.smote is None else self.smote.to_dict(),
            "train_rows": self.train_rows,
            "test_rows": self.test_rows,
            "synthetic_rows": self.synthetic_rows,
            "rows": [r.to_dict(include_timings) for r in self.rows],
        }

    def timings(self) -> list[dict]:
        return [{"learner": r.learner, "feature_count": r.feature_count, "train_seconds": r.train_seconds,
                 "predict_seconds_per_row": r.predict_seconds_per_row} for r in self.rows]

    def render(self, timings: bool = True) -> str:
        header = ["Model", "Features", "Accuracy", "Precision", "Recall", "FN"]
        if timings:
            header += ["Train s", "Predict us/row"]
        lines = []
        for r in self.rows:
            name = LEARNER_TITLES.get(r.learner, r.learner)
            if r.metrics is None:
                cells = [name, str(r.feature_count), "error", UNDEFINED, UNDEFINED, UNDEFINED]
            else:
                c = report_cells(r.metrics)
                cells = [name, str(r.feature_count), c["Accuracy"], c["Precision"], c["Recall"], c["FN"]]
            if timings:
                cells += [UNDEFINED if r.train_seconds is None else f"{r.train_seconds:.3f}",
                          UNDEFINED if r.predict_seconds_per_row is None
                          else f"{1e6 * r.predict_seconds_per_row:.3f}"]
            lines.append(cells)
        widths = [max(len(x[c]) for x in [header] + lines) for c in range(len(header))]
        out = []
        for cells in [header] + lines:
            out.append("  ".join([cells[0].ljust(widths[0])] + [v.rjust(w) for v, w in zip(cells[1:], widths[1:])]))
        errors = [f"{r.learner}/{r.feature_count}: {r.error}" for r in self.rows if r.error]
        return "\n".join(out + errors) + "\n"


def _timed_predict(model, X: np.ndarray, repeats: int) -> tuple[np.ndarray, float]:
    times = []
    pred = None
    for _ in range(max(1, repeats)):
        t0 = time.perf_counter()
        pred = model.predict(X)
        times.append(time.perf_counter() - t0)
    return pred, float(np.median(times))


def run_benchmark(table: FlowTable, learners: Sequence[str], subsets: Sequence[FeatureSubset],
                  split_cfg: SplitConfig = SplitConfig(), smote_cfg: SmoteConfig | None = None,
                  train_cfg: TrainConfig | None = None, timing_repeats: int = 3,
                  n_jobs: int = 1) -> BenchmarkTable:
    """Train and score every (learner, subset) pair on one shared split.

    The table is split once. When ``smote_cfg`` is given, SMOTE runs once on
    the full training partition and the test rows are never touched. Each
    cell projects train and test onto its subset, trains, and records
    metrics, the training wall time and the median prediction time over
    ``timing_repeats`` runs. A failing cell stores its error and the grid
    continues.
    """
    for name in learners:
        if name not in LEARNERS:
            raise DataError(f"unknown learner {name!r}; choose from {', '.join(LEARNERS)}")
    for s in subsets:
        missing = [n for n in s.names if n not in table.feature_names]
        if missing:
            raise DataError(f"subset features not in table: {missing}")
    cfg = train_cfg or TrainConfig(seed=split_cfg.seed, n_jobs=n_jobs)
    train_t, test_t = stratified_split(table, split_cfg.test_fraction, split_cfg.seed)
    synthetic = 0
    if smote_cfg is not None:
        train_t, rep = smote(train_t, smote_cfg, n_jobs=n_jobs)
        synthetic = rep.synthetic_added

    rows = []
    for subset in subsets:
        tr = train_t.select(subset.names)
        X_test = np.ascontiguousarray(test_t.select(subset.names).features)
        for name in learners:
            row = BenchmarkRow(name, len(subset), subset.names)
            try:
                t0 = time.perf_counter()
                model = train(name, tr, cfg)
                row.train_seconds = time.perf_counter() - t0
                pred, secs = _timed_predict(model, X_test, timing_repeats)
                row.predict_seconds_per_row = secs / max(1, X_test.shape[0])
                row.metrics = metrics(confusion(test_t.labels, pred))
            except Exception as exc:  # recorded per cell; the grid keeps going
                row.error = f"{type(exc).__name__}: {exc}"
            rows.append(row)
    return BenchmarkTable(rows, split_cfg, smote_cfg, train_t.row_count - synthetic, test_t.row_count, synthetic)
