"""Report envelopes and atomic file output.

Every report is a JSON object with sorted keys::

    {"format_version": 1, "tool_version": ..., "timestamp": ..., "kind": ...,
     "seed": ..., "config": {...}, "config_digest": "<sha256>", "payload": {...}}

``config_digest`` is the SHA-256 of the canonical (sorted-key, compact)
JSON of ``config``. ``timestamp`` honours ``SOURCE_DATE_EPOCH`` so that
reruns can be byte-identical.
"""
from __future__ import annotations

import datetime as _dt
import hashlib
import json
import math
import os
import tempfile
from dataclasses import dataclass, field
from pathlib import Path

from . import __version__

FORMAT_VERSION = 1


def _jsonable(obj):
    if isinstance(obj, float):
        if math.isnan(obj) or math.isinf(obj):
            return None
        return obj
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if hasattr(obj, "item") and callable(obj.item):
        return _jsonable(obj.item())
    return obj


def canonical_json(obj) -> str:
    return json.dumps(_jsonable(obj), sort_keys=True, separators=(",", ":"), allow_nan=False)


def config_digest(config: dict) -> str:
    return hashlib.sha256(canonical_json(config).encode()).hexdigest()


def report_timestamp() -> str:
    epoch = os.environ.get("SOURCE_DATE_EPOCH")
    if epoch is not None:
        when = _dt.datetime.fromtimestamp(int(epoch), tz=_dt.timezone.utc)
    else:
        when = _dt.datetime.now(tz=_dt.timezone.utc).replace(microsecond=0)
    return when.isoformat().replace("+00:00", "Z")


@dataclass
class ReportEnvelope:
    kind: str
    payload: dict
    config: dict = field(default_factory=dict)
    seed: int | None = None
    format_version: int = FORMAT_VERSION
    tool_version: str = __version__
    timestamp: str = field(default_factory=report_timestamp)

    @property
    def config_digest(self) -> str:
        return config_digest(self.config)

    def to_dict(self) -> dict:
        return {
            "format_version": self.format_version,
            "tool_version": self.tool_version,
            "timestamp": self.timestamp,
            "kind": self.kind,
            "seed": self.seed,
            "config": _jsonable(self.config),
            "config_digest": self.config_digest,
            "payload": _jsonable(self.payload),
        }

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2, allow_nan=False) + "\n"

    @classmethod
    def from_dict(cls, d: dict) -> "ReportEnvelope":
        env = cls(kind=d["kind"], payload=d["payload"], config=d.get("config", {}), seed=d.get("seed"),
                  format_version=d["format_version"], tool_version=d["tool_version"],
                  timestamp=d["timestamp"])
        if d.get("config_digest") not in (None, env.config_digest):
            raise ValueError("config_digest does not match config")
        return env


def provenance_block(kind: str, config: dict, seed: int | None) -> dict:
    """Self-description embedded in non-report artifacts (tables, models)."""
    return {"format_version": FORMAT_VERSION, "tool_version": __version__, "kind": kind, "seed": seed,
            "config": _jsonable(config), "config_digest": config_digest(config)}


def atomic_write_text(path, text: str) -> None:
    """Write via a temporary file in the target directory, then rename over ``path``."""
    path = Path(path)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent if str(path.parent) else ".")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def atomic_write_bytes(path, data: bytes) -> None:
    path = Path(path)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent if str(path.parent) else ".")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def emit_report(envelope: ReportEnvelope, path) -> None:
    atomic_write_text(path, envelope.dumps())


def read_report(path) -> ReportEnvelope:
    return ReportEnvelope.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))
