"""Canonical JSON serialization.

Everything the engine persists or compares byte-for-byte (bundles, events,
snapshots, reports, PROV documents) goes through these helpers: UTF-8,
sorted object keys, no insignificant whitespace, no NaN/Infinity, "\n" line
terminators. Two equal documents always serialize to identical bytes.
"""

from __future__ import annotations

import json
from typing import Any


def dumps(doc: Any) -> str:
    return json.dumps(doc, sort_keys=True, separators=(",", ":"),
                      ensure_ascii=False, allow_nan=False)


def dump_bytes(doc: Any) -> bytes:
    return dumps(doc).encode("utf-8")


def dump_line(doc: Any) -> bytes:
    return dump_bytes(doc) + b"\n"


def loads(data: str | bytes) -> Any:
    return json.loads(data)
