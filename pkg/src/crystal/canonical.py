"""Canonical JSON serialization for graph files and audit records.

Byte-stable rules: keys sorted, compact separators, ASCII escapes, floats
rendered with 17 significant digits, single trailing LF. Two structurally
equal payloads always serialize to identical bytes, which is what the
checksums and the replay guarantee lean on.
"""

from __future__ import annotations

import hashlib
import json
import math
from typing import Any

from .errors import ChecksumMismatch, UnknownFormatVersion

FORMAT_VERSION = 1


def format_float(value: float) -> str:
    if math.isnan(value) or math.isinf(value):
        raise ValueError(f"non-finite float {value!r} cannot be serialized")
    if value == 0.0:
        value = 0.0  # collapse -0.0 so reload-and-save is byte-stable
    return "%.17g" % value


def _write(value: Any, out: list[str]) -> None:
    if value is None:
        out.append("null")
    elif value is True:
        out.append("true")
    elif value is False:
        out.append("false")
    elif isinstance(value, str):
        out.append(json.dumps(value, ensure_ascii=True))
    elif isinstance(value, int):
        out.append(str(value))
    elif isinstance(value, float):
        out.append(format_float(value))
    elif isinstance(value, (list, tuple)):
        out.append("[")
        for i, item in enumerate(value):
            if i:
                out.append(",")
            _write(item, out)
        out.append("]")
    elif isinstance(value, dict):
        out.append("{")
        for i, key in enumerate(sorted(value)):
            if not isinstance(key, str):
                raise ValueError(f"non-string key {key!r}")
            if i:
                out.append(",")
            out.append(json.dumps(key, ensure_ascii=True))
            out.append(":")
            _write(value[key], out)
        out.append("}")
    else:
        raise ValueError(f"unserializable value of type {type(value).__name__}")


def canonical_dumps(payload: Any) -> str:
    """Serialize to the canonical text form (no trailing newline)."""
    out: list[str] = []
    _write(payload, out)
    return "".join(out)


def canonical_bytes(payload: Any) -> bytes:
    return (canonical_dumps(payload) + "\n").encode("ascii")


def checksum_of(payload: Any) -> str:
    return hashlib.sha256(canonical_bytes(payload)).hexdigest()


def wrap_graph_file(graph_payload: dict, config_payload: dict) -> dict:
    body = {
        "config": config_payload,
        "format_version": FORMAT_VERSION,
        "graph": graph_payload,
    }
    return {"checksum": checksum_of(body), **body}


def unwrap_graph_file(raw: dict) -> tuple[dict, dict]:
    """Validate format version and checksum; return (graph, config) payloads."""
    version = raw.get("format_version")
    if version != FORMAT_VERSION:
        raise UnknownFormatVersion(version)
    body = {
        "config": raw.get("config", {}),
        "format_version": version,
        "graph": raw.get("graph", {}),
    }
    expected = raw.get("checksum")
    actual = checksum_of(body)
    if expected != actual:
        raise ChecksumMismatch(f"checksum {expected!r} does not match content ({actual})")
    return body["graph"], body["config"]
