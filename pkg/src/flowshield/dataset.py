"""Flow-record tables: CSV ingestion, merging, label binarization, cleaning
and standardization.

Files follow the CICDDoS2019 convention: a header row whose names may carry
stray whitespace, one row per flow and a ``Label`` column holding either
``BENIGN`` or an attack name.
"""
from __future__ import annotations

import csv
import io
import json
import math
import struct
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DegenerateTableError, EmptyTableError, ParseError, SchemaError

NUMERIC = "numeric"
CATEGORICAL = "categorical"
LABEL = "label"

DEFAULT_LABEL_COLUMN = "Label"
DEFAULT_BENIGN_TOKEN = "BENIGN"
ATTACK_TOKEN = "ATTACK"
STD_FLOOR = 1e-12

# Attack vocabulary of the public CICDDoS2019 release (DrDoS_SSDP listed once).
CICDDOS2019_ATTACKS = (
    "TDTP",
    "Syn",
    "DrDoS_UDP",
    "DrDoS_DNS",
    "DrDoS_LDAP",
    "DrDoS_SSDP",
    "DrDoS_MSSQL",
    "DrDoS_NetBIOS",
    "UDP-lag",
    "DrDoS_NTP",
)

_MISSING_TOKENS = frozenset({"", "nan", "-nan", "na", "null", "none"})


@dataclass(frozen=True)
class ColumnSchema:
    """Ordered column identifiers of a flow table.

    ``names`` lists every column in file order, label included; ``kinds``
    tags each one as numeric, categorical or label.
    """

    names: tuple[str, ...]
    label_column: str
    kinds: tuple[str, ...]

    def __post_init__(self):
        if len(self.names) != len(self.kinds):
            raise SchemaError("names and kinds differ in length")
        if len(set(self.names)) != len(self.names):
            dupes = sorted({n for n in self.names if self.names.count(n) > 1})
            raise SchemaError(f"duplicate column names: {dupes}")
        if self.kinds.count(LABEL) != 1 or self.label_column not in self.names:
            raise SchemaError("schema needs exactly one label column")
        if self.kinds[self.names.index(self.label_column)] != LABEL:
            raise SchemaError(f"column {self.label_column!r} is not tagged as label")

    @property
    def feature_names(self) -> tuple[str, ...]:
        return tuple(n for n, k in zip(self.names, self.kinds) if k != LABEL)

    @property
    def feature_kinds(self) -> tuple[str, ...]:
        return tuple(k for k in self.kinds if k != LABEL)

    @property
    def numeric_count(self) -> int:
        return len(self.feature_names)

    @classmethod
    def for_features(cls, feature_names: Sequence[str], kinds: Sequence[str] | None = None,
                     label_column: str = DEFAULT_LABEL_COLUMN) -> "ColumnSchema":
        kinds = tuple(kinds) if kinds is not None else (NUMERIC,) * len(feature_names)
        return cls(tuple(feature_names) + (label_column,), label_column, kinds + (LABEL,))


@dataclass(frozen=True, eq=False)
class FlowTable:
    """Feature matrix, binary labels and schema of a set of flows.

    ``features`` is a ``(rows, features)`` float64 matrix. Before cleaning it
    may hold NaN (missing) and +-inf (non-finite) cells; categorical columns
    keep their raw strings in ``categorical`` with a placeholder in the matrix.
    ``raw_labels`` keeps the original label strings when they are known.
    """

    features: np.ndarray
    labels: np.ndarray
    schema: ColumnSchema
    raw_labels: np.ndarray | None = None
    categorical: Mapping[str, np.ndarray] = field(default_factory=dict)

    def __post_init__(self):
        feats = np.ascontiguousarray(self.features, dtype=np.float64)
        if feats.ndim != 2:
            feats = feats.reshape(len(self.labels), -1)
        labels = np.ascontiguousarray(self.labels, dtype=np.int64)
        if labels.ndim != 1 or len(labels) != feats.shape[0]:
            raise SchemaError("labels length must equal row count")
        if feats.shape[1] != self.schema.numeric_count:
            raise SchemaError(
                f"matrix has {feats.shape[1]} columns, schema declares {self.schema.numeric_count}"
            )
        if labels.size and not np.isin(labels, (0, 1)).all():
            raise SchemaError("labels must be 0 or 1")
        feats.setflags(write=False)
        labels.setflags(write=False)
        object.__setattr__(self, "features", feats)
        object.__setattr__(self, "labels", labels)
        if self.raw_labels is not None:
            raw = np.asarray(self.raw_labels, dtype=object)
            if len(raw) != len(labels):
                raise SchemaError("raw_labels length must equal row count")
            raw.setflags(write=False)
            object.__setattr__(self, "raw_labels", raw)
        cats = {}
        for name, values in dict(self.categorical).items():
            arr = np.asarray(values, dtype=object)
            arr.setflags(write=False)
            cats[name] = arr
        object.__setattr__(self, "categorical", cats)

    @classmethod
    def from_arrays(cls, features, labels, feature_names: Sequence[str],
                    raw_labels=None, label_column: str = DEFAULT_LABEL_COLUMN) -> "FlowTable":
        return cls(
            features=np.asarray(features, dtype=np.float64).reshape(len(labels), len(feature_names)),
            labels=np.asarray(labels),
            schema=ColumnSchema.for_features(feature_names, label_column=label_column),
            raw_labels=raw_labels,
        )

    @property
    def row_count(self) -> int:
        return self.features.shape[0]

    @property
    def col_count(self) -> int:
        return self.features.shape[1]

    @property
    def feature_names(self) -> tuple[str, ...]:
        return self.schema.feature_names

    def column_index(self, name: str) -> int:
        try:
            return self.feature_names.index(name)
        except ValueError:
            raise SchemaError(f"unknown feature {name!r}") from None

    def column(self, name: str) -> np.ndarray:
        return self.features[:, self.column_index(name)]

    def label_strings(self) -> np.ndarray:
        if self.raw_labels is not None:
            return self.raw_labels
        return np.where(self.labels == 1, ATTACK_TOKEN, DEFAULT_BENIGN_TOKEN).astype(object)

    def take(self, rows) -> "FlowTable":
        """Row subset (any integer index array or boolean mask), order kept as given."""
        rows = np.asarray(rows)
        return FlowTable(
            features=self.features[rows],
            labels=self.labels[rows],
            schema=self.schema,
            raw_labels=None if self.raw_labels is None else self.raw_labels[rows],
            categorical={k: v[rows] for k, v in self.categorical.items()},
        )

    def select(self, names: Sequence[str]) -> "FlowTable":
        """Column projection onto ``names`` in the given order."""
        idx = [self.column_index(n) for n in names]
        kinds = [self.schema.feature_kinds[i] for i in idx]
        return FlowTable(
            features=self.features[:, idx],
            labels=self.labels,
            schema=ColumnSchema.for_features(names, kinds, self.schema.label_column),
            raw_labels=self.raw_labels,
            categorical={k: v for k, v in self.categorical.items() if k in names},
        )

    def with_features(self, features: np.ndarray) -> "FlowTable":
        return FlowTable(features, self.labels, self.schema, self.raw_labels, self.categorical)

    def class_counts(self) -> tuple[int, int]:
        ones = int(self.labels.sum())
        return self.row_count - ones, ones

    def equals(self, other: "FlowTable") -> bool:
        """Bit-exact equality of values, labels and schema (NaN equal to NaN)."""
        if self.schema != other.schema or self.features.shape != other.features.shape:
            return False
        a = self.features.view(np.uint64)
        b = other.features.view(np.uint64)
        return bool(np.array_equal(a, b) and np.array_equal(self.labels, other.labels))


def binarize_labels(raw_labels: Iterable[str], benign_token: str = DEFAULT_BENIGN_TOKEN) -> np.ndarray:
    """Map label strings to 0 (benign, compared trimmed and case-insensitively) or 1."""
    token = benign_token.strip().casefold()
    return np.array([0 if str(v).strip().casefold() == token else 1 for v in raw_labels],
                    dtype=np.int64)


def _parse_cell(text: str) -> tuple[float, bool]:
    """Return (value, is_numeric). Missing tokens give (nan, True)."""
    s = text.strip()
    if s.casefold() in _MISSING_TOKENS:
        return math.nan, True
    try:
        return float(s), True
    except ValueError:
        return math.nan, False


def _parse_column(cells: list[str]) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized float parse with a per-cell fallback; returns values and a numeric mask."""
    try:
        values = np.array(cells, dtype=np.float64)
        return values, np.ones(len(cells), dtype=bool)
    except ValueError:
        pass
    values = np.empty(len(cells), dtype=np.float64)
    ok = np.empty(len(cells), dtype=bool)
    for i, c in enumerate(cells):
        values[i], ok[i] = _parse_cell(c)
    return values, ok


def _dedupe(names: list[str]) -> list[str]:
    seen: dict[str, int] = {}
    out = []
    for n in names:
        if n in seen:
            seen[n] += 1
            candidate = f"{n}.{seen[n]}"
            while candidate in seen:
                seen[n] += 1
                candidate = f"{n}.{seen[n]}"
            seen[candidate] = 0
            out.append(candidate)
        else:
            seen[n] = 0
            out.append(n)
    return out


def _locate_label(names: list[str], label_column: str) -> int:
    if label_column in names:
        return names.index(label_column)
    folded = [n.casefold() for n in names]
    if label_column.casefold() in folded:
        return folded.index(label_column.casefold())
    raise SchemaError(f"no {label_column!r} column in header")


def load_flow_csv(path, schema_policy: str = "infer", benign_token: str = DEFAULT_BENIGN_TOKEN,
                  label_column: str = DEFAULT_LABEL_COLUMN) -> FlowTable:
    """Read one flow CSV into a raw (uncleaned) ``FlowTable``.

    Args:
        path: CSV file with a header row.
        schema_policy: ``"strict"`` treats every non-label column as numeric
            (unparsable cells become missing) and rejects duplicate header
            names; ``"infer"`` tags a column categorical when any non-missing
            cell is not a number and renames duplicates ``name.1``, ``name.2``.
        benign_token: label value mapped to class 0.
        label_column: trimmed name of the target column.

    Raises:
        SchemaError: missing header, duplicate names (strict) or no label column.
        ParseError: a data row with the wrong number of fields.
    """
    if schema_policy not in ("strict", "infer"):
        raise ValueError(f"unknown schema_policy {schema_policy!r}")
    path = Path(path)
    with path.open(newline="", encoding="utf-8-sig") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaError(f"{path}: missing header row") from None
        names = [h.strip() for h in header]
        if not any(names):
            raise SchemaError(f"{path}: missing header row")
        if len(set(names)) != len(names):
            if schema_policy == "strict":
                raise SchemaError(f"{path}: duplicate column names in header")
            names = _dedupe(names)
        label_pos = _locate_label(names, label_column)
        width = len(names)
        rows = []
        for row in reader:
            if not row:
                continue
            if len(row) != width:
                raise ParseError(f"{path}: expected {width} fields, found {len(row)}", reader.line_num)
            rows.append(row)

    columns = list(zip(*rows)) if rows else [()] * width
    feature_names, kinds, matrix_cols = [], [], []
    categorical: dict[str, np.ndarray] = {}
    for j, name in enumerate(names):
        if j == label_pos:
            continue
        cells = list(columns[j])
        values, numeric = _parse_column(cells)
        if schema_policy == "infer" and not numeric.all():
            raw = np.array([c.strip() for c in cells], dtype=object)
            missing = np.array([c.casefold() in _MISSING_TOKENS for c in raw], dtype=bool)
            values = np.where(missing, np.nan, 0.0)
            categorical[name] = raw
            kinds.append(CATEGORICAL)
        else:
            kinds.append(NUMERIC)
        feature_names.append(name)
        matrix_cols.append(values)

    raw_labels = np.array([c.strip() for c in columns[label_pos]], dtype=object)
    all_names = list(feature_names)
    all_kinds = list(kinds)
    all_names.insert(label_pos, names[label_pos])
    all_kinds.insert(label_pos, LABEL)
    schema = ColumnSchema(tuple(all_names), names[label_pos], tuple(all_kinds))
    n = len(rows)
    matrix = np.column_stack(matrix_cols) if matrix_cols else np.empty((n, 0))
    return FlowTable(
        features=matrix.reshape(n, len(feature_names)),
        labels=binarize_labels(raw_labels, benign_token),
        schema=schema,
        raw_labels=raw_labels,
        categorical=categorical,
    )


def _format_value(v: float) -> str:
    if math.isnan(v):
        return "NaN"
    if math.isinf(v):
        return "Infinity" if v > 0 else "-Infinity"
    return repr(float(v))


def flow_csv_text(table: FlowTable) -> str:
    labels = table.label_strings()
    feat_pos = {n: i for i, n in enumerate(table.feature_names)}
    fh = io.StringIO()
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(table.schema.names)
    for r in range(table.row_count):
        out = []
        for name in table.schema.names:
            if name == table.schema.label_column:
                out.append(labels[r])
            elif name in table.categorical:
                out.append(table.categorical[name][r])
            else:
                out.append(_format_value(table.features[r, feat_pos[name]]))
        writer.writerow(out)
    return fh.getvalue()


def write_flow_csv(table: FlowTable, path) -> None:
    """Write ``table`` so that ``load_flow_csv`` reproduces it bit-exactly."""
    from .envelope import atomic_write_text

    atomic_write_text(path, flow_csv_text(table))


# Binary table artifact: 8-byte magic, uint32 version, uint32 header length,
# a JSON header (schema, label and categorical vocabularies), then the float64
# matrix (row-major), uint8 labels, int32 raw-label codes and one int32 code
# column per categorical feature. All little-endian.
TABLE_MAGIC = b"FSTABLE\x00"
TABLE_VERSION = 1


def _codes(values) -> tuple[list[str], np.ndarray]:
    vocab: dict[str, int] = {}
    codes = np.array([vocab.setdefault(str(v), len(vocab)) for v in values], dtype="<i4")
    return list(vocab), codes


def table_bytes(table: FlowTable, provenance: dict | None = None) -> bytes:
    """Binary artifact of ``table``; ``provenance`` is stored verbatim in the header."""
    label_vocab, label_codes = _codes(table.label_strings())
    cat_names = [n for n in table.feature_names if n in table.categorical]
    cats = {n: _codes(table.categorical[n]) for n in cat_names}
    header = {
        "names": list(table.schema.names),
        "kinds": list(table.schema.kinds),
        "label_column": table.schema.label_column,
        "rows": table.row_count,
        "label_vocab": label_vocab,
        "categorical": {n: cats[n][0] for n in cat_names},
    }
    if provenance is not None:
        header["provenance"] = provenance
    hb = json.dumps(header, sort_keys=True, separators=(",", ":")).encode()
    parts = [TABLE_MAGIC, struct.pack("<II", TABLE_VERSION, len(hb)), hb,
             np.ascontiguousarray(table.features, dtype="<f8").tobytes(),
             table.labels.astype(np.uint8).tobytes(), label_codes.tobytes()]
    parts += [cats[n][1].tobytes() for n in cat_names]
    return b"".join(parts)


def table_from_bytes(data: bytes, source: str = "<bytes>") -> FlowTable:
    if data[:8] != TABLE_MAGIC:
        raise SchemaError(f"{source}: not a flow table artifact")
    version, hlen = struct.unpack_from("<II", data, 8)
    if version != TABLE_VERSION:
        raise SchemaError(f"{source}: unsupported table version {version}")
    header = json.loads(data[16:16 + hlen])
    schema = ColumnSchema(tuple(header["names"]), header["label_column"], tuple(header["kinds"]))
    n, m = header["rows"], schema.numeric_count
    off = 16 + hlen
    need = off + n * m * 8 + n + 4 * n * (1 + len(header["categorical"]))
    if len(data) != need:
        raise ParseError(f"{source}: truncated or oversized table artifact", 0)
    feats = np.frombuffer(data, dtype="<f8", count=n * m, offset=off).reshape(n, m)
    off += n * m * 8
    labels = np.frombuffer(data, dtype=np.uint8, count=n, offset=off).astype(np.int64)
    off += n
    vocab = np.array(header["label_vocab"], dtype=object)
    raw = vocab[np.frombuffer(data, dtype="<i4", count=n, offset=off)] if n else np.array([], dtype=object)
    off += 4 * n
    categorical = {}
    for name in schema.feature_names:
        if name in header["categorical"]:
            cv = np.array(header["categorical"][name], dtype=object)
            codes = np.frombuffer(data, dtype="<i4", count=n, offset=off)
            categorical[name] = cv[codes] if n else np.array([], dtype=object)
            off += 4 * n
    return FlowTable(features=feats.copy(), labels=labels, schema=schema, raw_labels=raw,
                     categorical=categorical)


def write_table(table: FlowTable, path, provenance: dict | None = None) -> None:
    """Atomically write a table artifact; ``.csv`` paths get CSV, anything else binary.

    ``provenance`` is kept only by the binary format.
    """
    from .envelope import atomic_write_bytes

    if str(path).lower().endswith(".csv"):
        write_flow_csv(table, path)
    else:
        atomic_write_bytes(path, table_bytes(table, provenance))


def table_provenance(path) -> dict | None:
    """Provenance block of a binary table artifact, ``None`` for CSV or when absent."""
    with Path(path).open("rb") as fh:
        head = fh.read(16)
        if head[:8] != TABLE_MAGIC:
            return None
        _, hlen = struct.unpack_from("<II", head, 8)
        return json.loads(fh.read(hlen)).get("provenance")


def read_table(path, **csv_options) -> FlowTable:
    """Read a table artifact written by ``write_table`` (CSV or binary, by content)."""
    path = Path(path)
    with path.open("rb") as fh:
        head = fh.read(8)
    if head == TABLE_MAGIC:
        return table_from_bytes(path.read_bytes(), str(path))
    return load_flow_csv(path, **csv_options)


def load_flow_dir(path, **csv_options) -> FlowTable:
    """Load and merge every ``*.csv`` file of a directory in sorted name order."""
    files = sorted(p for p in Path(path).iterdir() if p.suffix.lower() == ".csv")
    if not files:
        raise SchemaError(f"{path}: no CSV files found")
    return merge_tables([load_flow_csv(f, **csv_options) for f in files])


def merge_tables(tables: Sequence[FlowTable]) -> FlowTable:
    """Concatenate tables row-wise in the given order.

    A column that is categorical in one input and numeric in another is
    promoted to categorical, formatting the numeric cells as text.

    Raises:
        SchemaError: column names or order differ; the message names the
            first differing column.
    """
    if not tables:
        raise SchemaError("nothing to merge")
    first = tables[0]
    if len(tables) == 1:
        return first
    for t in tables[1:]:
        a, b = first.schema.names, t.schema.names
        if a != b or first.schema.label_column != t.schema.label_column:
            for i in range(max(len(a), len(b))):
                x = a[i] if i < len(a) else "<none>"
                y = b[i] if i < len(b) else "<none>"
                if x != y:
                    raise SchemaError(f"schema mismatch at column {i}: {x!r} vs {y!r}")
            raise SchemaError("schema mismatch in label column")

    names = first.feature_names
    kinds = []
    categorical = {}
    for j, name in enumerate(names):
        if any(name in t.categorical for t in tables):
            parts = []
            for t in tables:
                if name in t.categorical:
                    parts.append(t.categorical[name])
                else:
                    parts.append(np.array([_format_value(v) for v in t.features[:, j]], dtype=object))
            categorical[name] = np.concatenate(parts)
            kinds.append(CATEGORICAL)
        else:
            kinds.append(NUMERIC)
    features = np.concatenate([t.features for t in tables], axis=0)
    for name in categorical:
        j = names.index(name)
        missing = np.array([str(c).casefold() in _MISSING_TOKENS for c in categorical[name]], dtype=bool)
        features[:, j] = np.where(missing, np.nan, 0.0)
    kinds_full = list(kinds)
    label_pos = first.schema.names.index(first.schema.label_column)
    kinds_full.insert(label_pos, LABEL)
    schema = ColumnSchema(first.schema.names, first.schema.label_column, tuple(kinds_full))
    return FlowTable(
        features=features,
        labels=np.concatenate([t.labels for t in tables]),
        schema=schema,
        raw_labels=np.concatenate([t.label_strings() for t in tables]),
        categorical=categorical,
    )


@dataclass(frozen=True)
class CleaningPolicy:
    near_zero_threshold: float = 0.95
    drop_columns: tuple[str, ...] = ()


@dataclass
class CleaningReport:
    rows_dropped_missing: int = 0
    rows_dropped_nonfinite: int = 0
    columns_dropped_nearzero: list[str] = field(default_factory=list)
    columns_dropped_explicit: list[str] = field(default_factory=list)
    categorical_encodings: dict[str, dict[str, int]] = field(default_factory=dict)
    rows_before: int = 0
    rows_after: int = 0

    def is_noop(self) -> bool:
        return (self.rows_dropped_missing == 0 and self.rows_dropped_nonfinite == 0
                and not self.columns_dropped_nearzero and not self.columns_dropped_explicit
                and not self.categorical_encodings)

    def to_dict(self) -> dict:
        return {
            "rows_before": self.rows_before,
            "rows_after": self.rows_after,
            "rows_dropped_missing": self.rows_dropped_missing,
            "rows_dropped_nonfinite": self.rows_dropped_nonfinite,
            "columns_dropped_nearzero": list(self.columns_dropped_nearzero),
            "columns_dropped_explicit": list(self.columns_dropped_explicit),
            "categorical_encodings": {k: dict(v) for k, v in self.categorical_encodings.items()},
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "CleaningReport":
        return cls(**{k: d[k] for k in d})


def clean(table: FlowTable, policy: CleaningPolicy = CleaningPolicy()) -> tuple[FlowTable, CleaningReport]:
    """Drop defective rows, encode categorical columns and remove mostly-zero columns.

    Steps, in order: rows holding any missing cell (NaN or an empty label)
    are dropped, then rows holding +-inf; categorical columns get integer
    codes by first appearance among the surviving rows; finally every column
    whose fraction of zeros is at least ``policy.near_zero_threshold`` is
    removed.

    Raises:
        EmptyTableError: no rows survive.
        DegenerateTableError: no columns survive.
    """
    report = CleaningReport(rows_before=table.row_count)
    names = list(table.feature_names)
    keep_cols = [j for j, n in enumerate(names) if n not in policy.drop_columns]
    report.columns_dropped_explicit = [n for n in names if n in policy.drop_columns]

    feats = table.features[:, keep_cols]
    col_names = [names[j] for j in keep_cols]
    label_strings = table.label_strings()
    label_missing = np.array([str(v).strip() == "" for v in label_strings], dtype=bool)
    missing = np.isnan(feats).any(axis=1) | label_missing
    nonfinite = ~missing & np.isinf(feats).any(axis=1)
    report.rows_dropped_missing = int(missing.sum())
    report.rows_dropped_nonfinite = int(nonfinite.sum())
    keep_rows = ~(missing | nonfinite)
    if not keep_rows.any():
        raise EmptyTableError("cleaning dropped every row")

    feats = np.array(feats[keep_rows], dtype=np.float64)
    for j, name in enumerate(col_names):
        if name not in table.categorical:
            continue
        raw = table.categorical[name][keep_rows]
        codes: dict[str, int] = {}
        col = np.empty(len(raw), dtype=np.float64)
        for i, v in enumerate(raw):
            col[i] = codes.setdefault(str(v), len(codes))
        feats[:, j] = col
        report.categorical_encodings[name] = codes

    zero_frac = (feats == 0.0).mean(axis=0)
    near_zero = zero_frac >= policy.near_zero_threshold
    report.columns_dropped_nearzero = [n for n, z in zip(col_names, near_zero) if z]
    survivors = [j for j in range(len(col_names)) if not near_zero[j]]
    if not survivors:
        raise DegenerateTableError("cleaning dropped every column")

    out_names = [col_names[j] for j in survivors]
    out = FlowTable(
        features=feats[:, survivors],
        labels=table.labels[keep_rows],
        schema=ColumnSchema.for_features(out_names, label_column=table.schema.label_column),
        raw_labels=label_strings[keep_rows],
    )
    report.rows_after = out.row_count
    return out, report


@dataclass(frozen=True)
class StandardizeStats:
    """Per-column mean and population standard deviation, std floored at ``STD_FLOOR``."""

    means: np.ndarray
    std_devs: np.ndarray
    clamped: tuple[bool, ...] = ()

    def apply(self, matrix: np.ndarray) -> np.ndarray:
        matrix = np.asarray(matrix, dtype=np.float64)
        if matrix.shape[-1] != len(self.means):
            raise SchemaError(f"expected {len(self.means)} columns, got {matrix.shape[-1]}")
        return (matrix - self.means) / self.std_devs

    def inverse(self, matrix: np.ndarray) -> np.ndarray:
        return np.asarray(matrix, dtype=np.float64) * self.std_devs + self.means

    def to_dict(self) -> dict:
        return {"means": [float(v) for v in self.means],
                "std_devs": [float(v) for v in self.std_devs],
                "clamped": list(self.clamped)}

    @classmethod
    def from_dict(cls, d: Mapping) -> "StandardizeStats":
        return cls(np.array(d["means"], dtype=np.float64), np.array(d["std_devs"], dtype=np.float64),
                   tuple(bool(c) for c in d.get("clamped", ())))

    @classmethod
    def fit(cls, matrix: np.ndarray) -> "StandardizeStats":
        matrix = np.asarray(matrix, dtype=np.float64)
        if matrix.shape[0] == 0:
            raise EmptyTableError("cannot standardize an empty table")
        means = matrix.mean(axis=0)
        std = matrix.std(axis=0)
        clamped = std < STD_FLOOR
        return cls(means, np.where(clamped, STD_FLOOR, std), tuple(bool(c) for c in clamped))


def standardize(table: FlowTable, stats: StandardizeStats | None = None) -> tuple[FlowTable, StandardizeStats]:
    """Center and scale each column; reuse ``stats`` (e.g. from training data) when given."""
    if stats is None:
        stats = StandardizeStats.fit(table.features)
    return table.with_features(stats.apply(table.features)), stats
