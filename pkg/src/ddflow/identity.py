"""Item identifiers and timestamps.

Item ids are 128-bit values rendered as 32 lowercase hex characters.  The
default generator is random; a seeded generator exists so tests and scripted
scenarios can produce repeatable stores.  Timestamps are UTC RFC 3339 with
millisecond precision, which makes lexicographic order equal chronological
order everywhere events are compared or filtered.
"""

from __future__ import annotations

import random
import re
import secrets
from datetime import datetime, timedelta, timezone

ITEM_ID_RE = re.compile(r"^[0-9a-f]{32}$")


def is_item_id(value: object) -> bool:
    return isinstance(value, str) and bool(ITEM_ID_RE.match(value))


class IdGenerator:
    """Produces item ids; seed it for deterministic sequences."""

    def __init__(self, seed: int | None = None):
        self._rng = random.Random(seed) if seed is not None else None

    def new_id(self) -> str:
        if self._rng is None:
            return secrets.token_hex(16)
        return "".join(self._rng.choice("0123456789abcdef") for _ in range(32))


def format_timestamp(dt: datetime) -> str:
    dt = dt.astimezone(timezone.utc)
    return dt.strftime("%Y-%m-%dT%H:%M:%S.") + f"{dt.microsecond // 1000:03d}Z"


def parse_timestamp(text: str) -> datetime:
    return datetime.strptime(text, "%Y-%m-%dT%H:%M:%S.%fZ").replace(tzinfo=timezone.utc)


TIMESTAMP_RE = re.compile(r"^\d{4}-\d{2}-\d{2}T\d{2}:\d{2}:\d{2}\.\d{3}Z$")


def is_timestamp(value: object) -> bool:
    return isinstance(value, str) and bool(TIMESTAMP_RE.match(value))


class SystemClock:
    def now(self) -> str:
        return format_timestamp(datetime.now(timezone.utc))


class FixedClock:
    """Deterministic clock: starts at an epoch and ticks a fixed step per call."""

    def __init__(self, start: str = "2000-01-01T00:00:00.000Z", step_ms: int = 1):
        self._current = parse_timestamp(start)
        self._step = timedelta(milliseconds=step_ms)

    def now(self) -> str:
        stamp = format_timestamp(self._current)
        self._current += self._step
        return stamp
