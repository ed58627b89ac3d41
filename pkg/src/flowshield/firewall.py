"""Firewall pre-filter simulation.

A trained tree-ensemble or logistic model is flattened into a
``CompiledModel`` over a small feature subset; flow streams are replayed
through it in batches by a compiled kernel and every flow gets an allow or
block verdict. Verdicts reproduce ``Model.predict`` bit for bit: the kernel
repeats the source model's floating-point operations in the same order.

Stream file format (little-endian)::

    bytes 0-7    magic b"FSFLOW\\x00\\x01"
    bytes 8-9    uint16 format version (1)
    bytes 10-11  uint16 feature count m
    byte  12     uint8 1 if every record carries a label byte, else 0
    bytes 13-15  reserved, zero
    records      m float64 values, then the optional uint8 label

A CSV file with a header row naming the subset features (and optionally a
``Label`` column) is accepted as well.
"""
from __future__ import annotations

import csv
import math
import struct
import time
from collections.abc import Iterator, Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from numba import njit

from .dataset import DEFAULT_BENIGN_TOKEN, DEFAULT_LABEL_COLUMN, FlowTable, binarize_labels
from .envelope import atomic_write_bytes
from .errors import ArityError, NotCompilableError, ParseError, SchemaError
from .evaluation import ConfusionMatrix, SplitConfig, stratified_split
from .featsel import FeatureSubset, ImportanceRanking, importance_config, select_top_k, tree_importances
from .learners import (AdaBoostModel, CartConfig, ForestConfig, ForestModel, GbtModel, LogRegModel, TrainConfig,
                       TreeModel, train)
from .learners.base import Model

FIREWALL_FEATURES = ("Inbound", "Destination Port", "URG Flag Count", "Source Port", "Avg Bwd Segment Size")
COMPILABLE = ("cart", "rf", "ada", "gbt", "logreg")

MODE_MEAN = 0   # verdict: acc / a >= 0.5            (tree, forest)
MODE_LOGIT = 1  # verdict: b + a * acc >= 0           (gbt)
MODE_VOTE = 2   # verdict: 0.5 * (1 + acc / a) >= 0.5 (adaboost)

STREAM_MAGIC = b"FSFLOW\x00\x01"
STREAM_VERSION = 1
DEFAULT_BATCH = 4096
DEFAULT_WARMUP = 10_000
POLICIES = ("block", "log_only")
FIREWALL_MAX_DEPTH = 6  # depth cap of the sweep's trees: a firewall tree must stay shallow


# ---------------------------------------------------------------- kernels

@njit(cache=True, nogil=True)
def _tally(verdict, y, has_y, counts):
    # counts: [attack verdicts, tp, fp, tn, fn]
    for i in range(verdict.shape[0]):
        v = verdict[i]
        counts[0] += v
        if has_y:
            if y[i] == 1:
                if v == 1:
                    counts[1] += 1
                else:
                    counts[4] += 1
            else:
                if v == 1:
                    counts[2] += 1
                else:
                    counts[3] += 1


@njit(cache=True, nogil=True)
def trees_batch(feature, threshold, left, right, value, roots, mode, a, b, X, y, has_y, verdict, counts):
    n_trees = roots.shape[0]
    for i in range(X.shape[0]):
        acc = 0.0
        for t in range(n_trees):
            node = roots[t]
            while feature[node] >= 0:
                if X[i, feature[node]] > threshold[node]:
                    node = right[node]
                else:
                    node = left[node]
            acc += value[node]
        if mode == MODE_MEAN:
            hit = acc / a >= 0.5
        elif mode == MODE_LOGIT:
            hit = b + a * acc >= 0.0
        else:
            hit = 0.5 * (1.0 + acc / a) >= 0.5
        verdict[i] = 1 if hit else 0
    _tally(verdict, y, has_y, counts)


@njit(cache=True, nogil=True)
def linear_batch(slots, means, stds, beta, X, y, has_y, verdict, counts):
    p = means.shape[0]
    for i in range(X.shape[0]):
        acc = beta[0]
        for j in range(p):
            acc += beta[j + 1] * ((X[i, slots[j]] - means[j]) / stds[j])
        verdict[i] = 1 if acc >= 0.0 else 0
    _tally(verdict, y, has_y, counts)


# ---------------------------------------------------------------- compilation

@dataclass
class CompiledModel:
    """Flat evaluator over ``feature_names`` (the stream column order).

    Tree kinds hold concatenated node arrays whose ``feature`` entries are
    already stream positions; the linear kind holds ``slots`` into the
    stream plus the standardization and coefficients.
    """

    kind: str
    source_kind: str
    feature_names: tuple[str, ...]
    arrays: dict
    mode: int = MODE_MEAN
    a: float = 1.0
    b: float = 0.0
    decision_threshold: float = 0.5

    @property
    def n_features(self) -> int:
        return len(self.feature_names)

    @property
    def n_nodes(self) -> int:
        return int(len(self.arrays["feature"])) if self.kind == "trees" else 0

    def run_batch(self, X, y, has_y, verdict, counts) -> None:
        if self.kind == "trees":
            A = self.arrays
            trees_batch(A["feature"], A["threshold"], A["left"], A["right"], A["value"], A["roots"],
                        self.mode, self.a, self.b, X, y, has_y, verdict, counts)
        else:
            A = self.arrays
            linear_batch(A["slots"], A["means"], A["stds"], A["beta"], X, y, has_y, verdict, counts)

    def verdicts(self, X) -> np.ndarray:
        """Verdict (1 = block) for every row of a stream-ordered matrix."""
        X = np.ascontiguousarray(X, dtype=np.float64)
        if X.ndim != 2 or X.shape[1] != self.n_features:
            raise ArityError(f"expected {self.n_features} columns {list(self.feature_names)}")
        out = np.empty(X.shape[0], dtype=np.uint8)
        self.run_batch(X, np.zeros(0, np.uint8), False, out, np.zeros(5, np.int64))
        return out

    def summary(self) -> dict:
        d = {"kind": self.kind, "source_kind": self.source_kind, "feature_names": list(self.feature_names),
             "decision_threshold": self.decision_threshold}
        if self.kind == "trees":
            d.update(n_trees=int(len(self.arrays["roots"])), n_nodes=self.n_nodes)
        return d


def _slot_map(model: Model, names: tuple[str, ...]) -> np.ndarray:
    if set(model.feature_names) != set(names) or len(names) != len(model.feature_names):
        raise SchemaError(
            f"model was trained on {list(model.feature_names)}, not on the subset {list(names)}; "
            "retrain the model on the subset before compiling"
        )
    return np.array([names.index(n) for n in model.feature_names], dtype=np.int64)


def _remap(feature: np.ndarray, slots: np.ndarray) -> np.ndarray:
    return np.where(feature >= 0, slots[np.maximum(feature, 0)], -1).astype(np.int64)


def compile_model(model: Model, subset: FeatureSubset | Sequence[str] = FIREWALL_FEATURES) -> CompiledModel:
    """Flatten a tree, forest, AdaBoost, GBT or logistic model over ``subset``.

    Raises:
        NotCompilableError: naive Bayes, KNN or any other kind.
        SchemaError: the model was not trained on exactly ``subset``.
    """
    names = tuple(subset.names if isinstance(subset, FeatureSubset) else subset)
    if not isinstance(model, (TreeModel, ForestModel, AdaBoostModel, GbtModel, LogRegModel)):
        raise NotCompilableError(
            f"{type(model).kind} models are not compilable; use tree/linear kinds "
            f"({', '.join(COMPILABLE)})"
        )
    slots = _slot_map(model, names)
    if isinstance(model, LogRegModel):
        return CompiledModel("linear", model.kind, names,
                             {"slots": slots, "means": model.stats.means.copy(),
                              "stds": model.stats.std_devs.copy(), "beta": model.beta.copy()})
    if isinstance(model, TreeModel):
        flat = (model.feature, model.threshold, model.left, model.right, model.value, np.zeros(1, np.int64))
        mode, a, b = MODE_MEAN, 1.0, 0.0
    elif isinstance(model, ForestModel):
        flat = model.flat()
        mode, a, b = MODE_MEAN, float(len(model.trees)), 0.0
    elif isinstance(model, AdaBoostModel):
        flat = model.flat()
        mode, a, b = MODE_VOTE, float(model.alphas.sum()), 0.0
    else:
        if model.trees:
            flat = model.flat()
        else:  # no rounds: a single leaf holding 0 leaves raw == base score
            flat = (np.array([-1]), np.zeros(1), np.array([-1]), np.array([-1]), np.zeros(1), np.zeros(1, np.int64))
        mode, a, b = MODE_LOGIT, float(model.eta), float(model.base_score)
    feature, threshold, left, right, value, roots = flat
    arrays = {"feature": _remap(np.asarray(feature), slots), "threshold": np.array(threshold, np.float64),
              "left": np.array(left, np.int64), "right": np.array(right, np.int64),
              "value": np.array(value, np.float64), "roots": np.array(roots, np.int64)}
    return CompiledModel("trees", model.kind, names, arrays, mode, a, b)


def equivalence_mismatches(model: Model, compiled: CompiledModel, probes: np.ndarray) -> int:
    """Rows of ``probes`` (stream order) where compiled and source verdicts differ."""
    probes = np.ascontiguousarray(probes, dtype=np.float64)
    order = [compiled.feature_names.index(n) for n in model.feature_names]
    source = model.predict(probes[:, order])
    return int(np.count_nonzero(source != compiled.verdicts(probes)))


def random_probes(table: FlowTable | None, names: Sequence[str], n: int, seed: int = 0) -> np.ndarray:
    """Probe inputs mixing resampled observed values, split-adjacent jitter and wide noise."""
    rng = np.random.default_rng([seed, 0xB0B])
    m = len(names)
    if table is None or table.row_count == 0:
        return rng.normal(scale=1e3, size=(n, m))
    X = table.select(names).features
    out = X[rng.integers(0, X.shape[0], size=(n, m)), np.arange(m)]
    scale = np.where(X.std(axis=0) > 0, X.std(axis=0), 1.0)
    third = n // 3
    out[:third] += rng.normal(size=(third, m)) * scale * 1e-3
    lo, hi = X.min(axis=0) - scale, X.max(axis=0) + scale
    out[2 * third:] = rng.uniform(lo, hi, size=(n - 2 * third, m))
    return np.ascontiguousarray(out)


# ---------------------------------------------------------------- streams

class FlowStream:
    """Source of flow batches; ``batches`` yields (start index, X, labels or None)."""

    feature_names: tuple[str, ...] | None = None
    n_features: int = 0

    def batches(self, batch_size: int) -> Iterator[tuple[int, np.ndarray, np.ndarray | None]]:
        raise NotImplementedError

    def materialize(self) -> "ArrayStream":
        parts, labels = [], []
        for _, X, y in self.batches(DEFAULT_BATCH):
            parts.append(X)
            labels.append(y)
        X = np.vstack(parts) if parts else np.empty((0, self.n_features))
        has = bool(labels) and labels[0] is not None
        return ArrayStream(X, np.concatenate(labels) if has else None, self.feature_names)


class ArrayStream(FlowStream):
    def __init__(self, X, labels=None, feature_names=None):
        X = np.ascontiguousarray(X, dtype=np.float64)
        if X.ndim != 2:
            X = X.reshape(-1, len(feature_names) if feature_names else 1)
        self.X = X
        self.labels = None if labels is None else np.ascontiguousarray(labels, dtype=np.uint8)
        if self.labels is not None and len(self.labels) != X.shape[0]:
            raise ArityError("label count differs from flow count", index=min(len(self.labels), X.shape[0]))
        self.feature_names = None if feature_names is None else tuple(feature_names)
        self.n_features = X.shape[1]

    def __len__(self) -> int:
        return self.X.shape[0]

    def slice(self, lo: int, hi: int) -> "ArrayStream":
        return ArrayStream(self.X[lo:hi], None if self.labels is None else self.labels[lo:hi], self.feature_names)

    def batches(self, batch_size):
        for lo in range(0, self.X.shape[0], batch_size):
            hi = min(lo + batch_size, self.X.shape[0])
            yield lo, self.X[lo:hi], None if self.labels is None else self.labels[lo:hi]

    def materialize(self):
        return self


def stream_from_table(table: FlowTable, names: Sequence[str], labeled: bool = True, tile: int = 1) -> ArrayStream:
    X = table.select(names).features
    y = table.labels.astype(np.uint8) if labeled else None
    if tile > 1:
        X = np.tile(X, (tile, 1))
        y = None if y is None else np.tile(y, tile)
    return ArrayStream(X, y, names)


def _record_dtype(m: int, has_labels: bool) -> np.dtype:
    fields = [("x", "<f8", (m,))]
    if has_labels:
        fields.append(("y", "u1"))
    return np.dtype(fields)


def stream_bytes(X, labels=None) -> bytes:
    X = np.ascontiguousarray(X, dtype=np.float64)
    m = X.shape[1]
    has = labels is not None
    rec = np.zeros(X.shape[0], dtype=_record_dtype(m, has))
    rec["x"] = X
    if has:
        rec["y"] = np.asarray(labels, dtype=np.uint8)
    header = STREAM_MAGIC + struct.pack("<HHB3x", STREAM_VERSION, m, 1 if has else 0)
    return header + rec.tobytes()


def write_stream(path, X, labels=None) -> None:
    atomic_write_bytes(path, stream_bytes(X, labels))


def read_binary_stream(path, feature_names=None) -> ArrayStream:
    data = Path(path).read_bytes()
    if data[:8] != STREAM_MAGIC:
        raise SchemaError(f"{path}: not a flow stream file")
    version, m, has = struct.unpack_from("<HHB", data, 8)
    if version != STREAM_VERSION:
        raise SchemaError(f"{path}: unsupported stream version {version}")
    dt = _record_dtype(m, bool(has))
    body = len(data) - 16
    if body % dt.itemsize:
        raise ArityError(f"{path}: trailing partial record", index=body // dt.itemsize)
    rec = np.frombuffer(data, dtype=dt, offset=16)
    return ArrayStream(np.ascontiguousarray(rec["x"]).reshape(len(rec), m),
                       np.ascontiguousarray(rec["y"]) if has else None, feature_names)


class CsvStream(FlowStream):
    """Lazily parsed CSV stream; columns are matched to ``feature_names`` by header name."""

    def __init__(self, path, feature_names: Sequence[str], label_column: str = DEFAULT_LABEL_COLUMN,
                 benign_token: str = DEFAULT_BENIGN_TOKEN):
        self.path = Path(path)
        self.feature_names = tuple(feature_names)
        self.n_features = len(self.feature_names)
        self.benign_token = benign_token
        with self.path.open(newline="", encoding="utf-8-sig") as fh:
            header = [h.strip() for h in next(csv.reader(fh), [])]
        missing = [n for n in self.feature_names if n not in header]
        if missing:
            raise ArityError(f"{self.path}: stream lacks features {missing}", index=0)
        self.width = len(header)
        self.cols = [header.index(n) for n in self.feature_names]
        self.label_col = header.index(label_column) if label_column in header else None

    def batches(self, batch_size):
        with self.path.open(newline="", encoding="utf-8-sig") as fh:
            reader = csv.reader(fh)
            next(reader)
            idx = 0
            buf_x, buf_y = [], []
            for row in reader:
                if not row:
                    continue
                if len(row) != self.width:
                    raise ArityError(f"flow {idx} has {len(row)} fields, expected {self.width}", index=idx)
                try:
                    buf_x.append([float(row[c]) for c in self.cols])
                except ValueError as exc:
                    raise ParseError(f"flow {idx}: {exc}", reader.line_num) from None
                if self.label_col is not None:
                    buf_y.append(row[self.label_col])
                idx += 1
                if len(buf_x) == batch_size:
                    yield self._emit(idx - len(buf_x), buf_x, buf_y)
                    buf_x, buf_y = [], []
            if buf_x:
                yield self._emit(idx - len(buf_x), buf_x, buf_y)

    def _emit(self, start, buf_x, buf_y):
        X = np.ascontiguousarray(buf_x, dtype=np.float64).reshape(len(buf_x), self.n_features)
        y = None
        if self.label_col is not None:
            y = binarize_labels(buf_y, self.benign_token).astype(np.uint8)
        return start, X, y


def open_stream(path, feature_names: Sequence[str] | None = None) -> FlowStream:
    """Open a binary stream file or, failing the magic check, a CSV stream."""
    with Path(path).open("rb") as fh:
        head = fh.read(8)
    if head == STREAM_MAGIC:
        return read_binary_stream(path, feature_names)
    if feature_names is None:
        raise SchemaError("CSV streams need the feature names to select columns")
    return CsvStream(path, feature_names)


# ---------------------------------------------------------------- replay

@dataclass
class SimReport:
    flows_processed: int
    allow: int
    block: int
    logged: int
    policy: str
    throughput: float | None
    latency_p50_ns: float | None
    latency_p99_ns: float | None
    timed_flows: int
    confusion: ConfusionMatrix | None
    recall: float | None
    flags: list[str] = field(default_factory=list)
    shards: int = 1
    verdicts: np.ndarray | None = field(default=None, repr=False)

    @property
    def predicted_attacks(self) -> int:
        return self.block + self.logged

    def to_dict(self, include_timing: bool = True) -> dict:
        d = {"flows_processed": self.flows_processed, "allow": self.allow, "block": self.block,
             "logged": self.logged, "policy": self.policy, "shards": self.shards,
             "confusion": None if self.confusion is None else self.confusion.to_dict(),
             "recall": self.recall, "flags": list(self.flags)}
        if include_timing:
            d.update(throughput_flows_per_s=self.throughput, latency_p50_ns=self.latency_p50_ns,
                     latency_p99_ns=self.latency_p99_ns, timed_flows=self.timed_flows)
        return d

    def render(self) -> str:
        def fmt(v, spec):
            return "undefined" if v is None else format(v, spec)

        rows = [("flows processed", str(self.flows_processed)), ("policy", self.policy),
                ("allow", str(self.allow)), ("block", str(self.block)), ("logged", str(self.logged)),
                ("throughput (flows/s)", fmt(self.throughput, ",.0f")),
                ("latency p50 (ns/flow)", fmt(self.latency_p50_ns, ".2f")),
                ("latency p99 (ns/flow)", fmt(self.latency_p99_ns, ".2f")),
                ("detection recall", fmt(self.recall, ".4f"))]
        if self.confusion is not None:
            c = self.confusion
            rows.append(("confusion", f"TP={c.tp} FP={c.fp} TN={c.tn} FN={c.fn}"))
        if self.flags:
            rows.append(("flags", ", ".join(self.flags)))
        w = max(len(k) for k, _ in rows)
        return "\n".join(f"{k.ljust(w)}  {v}" for k, v in rows) + "\n"


class _Tally:
    def __init__(self, batch_size: int, keep: bool):
        self.counts = np.zeros(5, dtype=np.int64)
        self.verdict = np.empty(batch_size, dtype=np.uint8)
        self.empty_y = np.zeros(0, dtype=np.uint8)
        self.samples: list[float] = []
        self.flows = 0
        self.timed = 0
        self.seconds = 0.0
        self.has_labels: bool | None = None
        self.keep = keep
        self.kept: list[np.ndarray] = []

    def step(self, compiled: CompiledModel, X, y, timed: bool):
        n = X.shape[0]
        self.flows += n
        out = self.verdict[:n]
        has = y is not None
        if self.has_labels is None:
            self.has_labels = has
        elif self.has_labels != has:
            raise ArityError("stream mixes labeled and unlabeled flows")
        if timed:
            t0 = time.perf_counter_ns()
            compiled.run_batch(X, y if has else self.empty_y, has, out, self.counts)
            dt = time.perf_counter_ns() - t0
            self.samples.append(dt / n)
            self.timed += n
            self.seconds += dt * 1e-9
        else:
            compiled.run_batch(X, y if has else self.empty_y, has, out, self.counts)
        if self.keep:
            self.kept.append(out.copy())


def _check_arity(compiled: CompiledModel, start: int, X: np.ndarray) -> np.ndarray:
    if X.ndim != 2 or X.shape[1] != compiled.n_features:
        raise ArityError(f"flow {start} has {X.shape[-1]} values, model expects {compiled.n_features}",
                         index=start)
    return np.ascontiguousarray(X, dtype=np.float64)


def replay(compiled: CompiledModel, stream: FlowStream, policy: str = "block", batch_size: int = DEFAULT_BATCH,
           warmup_flows: int = DEFAULT_WARMUP, n_shards: int = 1, keep_verdicts: bool = False) -> SimReport:
    """Classify every flow of ``stream`` and report counts, detection and speed.

    The first ``warmup_flows`` flows are classified but not timed. Latency
    percentiles are per-flow amortized batch times. With ``n_shards > 1``
    the timed part of the stream is split into contiguous shards evaluated
    on worker threads; verdicts and counts do not change.

    Raises:
        ArityError: a flow's arity differs from the compiled model's; the
            error carries the flow index.
    """
    if policy not in POLICIES:
        raise ValueError(f"policy must be one of {POLICIES}")
    if stream.feature_names is not None and tuple(stream.feature_names) != compiled.feature_names:
        if sorted(stream.feature_names) != sorted(compiled.feature_names):
            raise ArityError(f"stream features {list(stream.feature_names)} differ from "
                             f"{list(compiled.feature_names)}", index=0)
    if stream.n_features and stream.n_features != compiled.n_features:
        raise ArityError(f"stream carries {stream.n_features} values per flow, model expects "
                         f"{compiled.n_features}", index=0)
    if n_shards > 1:
        stream = stream.materialize()

    main = _Tally(batch_size, keep_verdicts)
    shard_tallies: list[_Tally] = []
    wall = None
    if n_shards <= 1:
        for start, X, y in stream.batches(batch_size):
            X = _check_arity(compiled, start, X)
            cut = min(X.shape[0], max(0, warmup_flows - start))
            if cut:
                main.step(compiled, X[:cut], None if y is None else y[:cut], timed=False)
            if cut < X.shape[0]:
                main.step(compiled, X[cut:], None if y is None else y[cut:], timed=True)
    else:
        n = len(stream)
        w = min(warmup_flows, n)
        for start, X, y in stream.slice(0, w).batches(batch_size):
            main.step(compiled, _check_arity(compiled, start, X), y, timed=False)
        bounds = np.linspace(w, n, n_shards + 1).astype(np.int64)
        shard_tallies = [_Tally(batch_size, keep_verdicts) for _ in range(n_shards)]

        def run(s):
            lo, hi = int(bounds[s]), int(bounds[s + 1])
            for start, X, y in stream.slice(lo, hi).batches(batch_size):
                shard_tallies[s].step(compiled, _check_arity(compiled, lo + start, X), y, timed=True)

        t0 = time.perf_counter_ns()
        with ThreadPoolExecutor(max_workers=n_shards) as pool:
            list(pool.map(run, range(n_shards)))
        wall = (time.perf_counter_ns() - t0) * 1e-9

    tallies = [main] + shard_tallies
    counts = sum(t.counts for t in tallies)
    total = sum(t.flows for t in tallies)
    timed = sum(t.timed for t in tallies)
    samples = [v for t in tallies for v in t.samples]
    has_labels = any(t.has_labels for t in tallies)
    attacks = int(counts[0])
    tp, fp, tn, fn = (int(c) for c in counts[1:])
    flags = []
    secs = wall if wall is not None else sum(t.seconds for t in tallies)
    throughput = timed / secs if timed and secs > 0 else None
    if throughput is None:
        flags.append("throughput_undefined")
    cm = ConfusionMatrix(tp, fp, tn, fn) if has_labels else None
    recall = None
    if cm is not None:
        if tp + fn == 0:
            flags.append("recall_undefined_no_positives")
        else:
            recall = tp / (tp + fn)
    block = attacks if policy == "block" else 0
    logged = attacks if policy == "log_only" else 0
    verdicts = None
    if keep_verdicts:
        kept = [v for t in tallies for v in t.kept]
        verdicts = np.concatenate(kept) if kept else np.zeros(0, np.uint8)
    return SimReport(
        flows_processed=total, allow=total - block, block=block, logged=logged, policy=policy,
        throughput=throughput,
        latency_p50_ns=float(np.percentile(samples, 50)) if samples else None,
        latency_p99_ns=float(np.percentile(samples, 99)) if samples else None,
        timed_flows=timed, confusion=cm, recall=recall, flags=flags, shards=max(1, n_shards),
        verdicts=verdicts,
    )


# ---------------------------------------------------------------- feature-count sweep

@dataclass
class SweepRow:
    count: int
    features: tuple[str, ...] = ()
    recall: float | None = None
    throughput: float | None = None
    latency_p50_ns: float | None = None
    flows: int = 0
    error: str | None = None

    def to_dict(self, include_timing: bool = True) -> dict:
        d = {"count": self.count, "features": list(self.features), "recall": self.recall,
             "flows": self.flows, "error": self.error}
        if include_timing:
            d.update(throughput_flows_per_s=self.throughput, latency_p50_ns=self.latency_p50_ns)
        return d


def feature_count_sweep(family: str, table: FlowTable, counts: Sequence[int] = (30, 20, 10, 5),
                        ranking: ImportanceRanking | None = None, split_cfg: SplitConfig = SplitConfig(),
                        train_cfg: TrainConfig | None = None, min_stream_flows: int = 200_000,
                        batch_size: int = DEFAULT_BATCH, warmup_flows: int = DEFAULT_WARMUP,
                        n_jobs: int = 1) -> list[SweepRow]:
    """Recall and throughput of ``family`` retrained on the top-k features for each k.

    One stratified split is shared by every row. Features are ranked by
    forest importances on the training part unless ``ranking`` is given.
    Each row's stream is the test part projected on its features, tiled to
    at least ``min_stream_flows`` flows so timings are comparable. Failures
    are recorded in the row. Without ``train_cfg``, trees (CART and forest)
    are capped at ``FIREWALL_MAX_DEPTH``.
    """
    if family not in COMPILABLE:
        raise NotCompilableError(f"{family} is not compilable; use one of {', '.join(COMPILABLE)}")
    cfg = train_cfg or TrainConfig(seed=split_cfg.seed, n_jobs=n_jobs, cart=CartConfig(max_depth=FIREWALL_MAX_DEPTH),
                                   forest=ForestConfig(max_depth=FIREWALL_MAX_DEPTH))
    train_t, test_t = stratified_split(table, split_cfg.test_fraction, split_cfg.seed)
    if ranking is None:
        ranking = tree_importances(train_t, importance_config(split_cfg.seed, n_jobs))
    tile = max(1, math.ceil(min_stream_flows / max(1, test_t.row_count)))
    rows = []
    for k in counts:
        row = SweepRow(int(k))
        try:
            subset = select_top_k(ranking, int(k))
            row.features = subset.names
            model = train(family, train_t.select(subset.names), cfg)
            compiled = compile_model(model, subset)
            rep = replay(compiled, stream_from_table(test_t, subset.names, tile=tile), "block",
                         batch_size, warmup_flows)
            row.recall, row.throughput = rep.recall, rep.throughput
            row.latency_p50_ns, row.flows = rep.latency_p50_ns, rep.flows_processed
        except Exception as exc:  # recorded per row; the sweep keeps going
            row.error = f"{type(exc).__name__}: {exc}"
        rows.append(row)
    return rows


def render_sweep(rows: Sequence[SweepRow]) -> str:
    header = ["Features", "Recall", "Throughput (flows/s)", "p50 (ns/flow)"]
    body = []
    for r in rows:
        if r.error:
            body.append([str(r.count), "error", "-", "-"])
        else:
            body.append([str(r.count), "undefined" if r.recall is None else f"{r.recall:.4f}",
                         "undefined" if r.throughput is None else f"{r.throughput:,.0f}",
                         "undefined" if r.latency_p50_ns is None else f"{r.latency_p50_ns:.2f}"])
    widths = [max(len(x[c]) for x in [header] + body) for c in range(len(header))]
    lines = ["  ".join(v.rjust(w) for v, w in zip(cells, widths)) for cells in [header] + body]
    lines += [f"{r.count}: {r.error}" for r in rows if r.error]
    return "\n".join(lines) + "\n"
