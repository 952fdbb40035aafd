"""Engine error type shared by every module.

Every failure the engine can signal carries a stable string code (the codes
are part of the public contract: clients and the HTTP error table key off
them) plus an optional structured detail document.
"""

from __future__ import annotations

from typing import Any


class EngineError(Exception):
    """An engine failure with a stable code and optional detail payload."""

    def __init__(self, code: str, message: str = "", detail: Any = None):
        self.code = code
        self.message = message or code
        self.detail = detail
        super().__init__(f"{code}: {self.message}" if message else code)

    def to_doc(self) -> dict:
        doc: dict[str, Any] = {"code": self.code, "message": self.message}
        if self.detail is not None:
            doc["detail"] = self.detail
        return doc


# Parse / reference errors
PARSE_ERROR = "PARSE_ERROR"
GRAPH_INVALID = "GRAPH_INVALID"
DANGLING_REF = "DANGLING_REF"

# Registry / item lookup
UNKNOWN_DESCRIPTION = "UNKNOWN_DESCRIPTION"
UNKNOWN_VERSION = "UNKNOWN_VERSION"
UNKNOWN_ITEM = "UNKNOWN_ITEM"

# Property / collection effects
PROPERTY_TYPE_MISMATCH = "PROPERTY_TYPE_MISMATCH"
UNDECLARED_PROPERTY = "UNDECLARED_PROPERTY"
IMMUTABLE_PROPERTY = "IMMUTABLE_PROPERTY"
UNKNOWN_TARGET = "UNKNOWN_TARGET"
MEMBER_TYPE_FORBIDDEN = "MEMBER_TYPE_FORBIDDEN"
DUPLICATE_MEMBER = "DUPLICATE_MEMBER"

# Job execution
UNKNOWN_JOB = "UNKNOWN_JOB"
ROLE_DENIED = "ROLE_DENIED"
OUTCOME_INVALID = "OUTCOME_INVALID"
SCRIPT_ERROR = "SCRIPT_ERROR"

# Scripting
SYNTAX = "SYNTAX"
TYPE_ERROR = "TYPE_ERROR"
MISSING_PATH = "MISSING_PATH"
NOT_BOOLEAN = "NOT_BOOLEAN"
DIV_ZERO = "DIV_ZERO"

# Schemas
SCHEMA_PARSE = "SCHEMA_PARSE"

# Soundness
BOUND_EXCEEDED = "BOUND_EXCEEDED"

# Migration
NAME_MISMATCH = "NAME_MISMATCH"
MIGRATION_ORPHAN = "MIGRATION_ORPHAN"
MIGRATION_UNSOUND = "MIGRATION_UNSOUND"
BAD_REMAP = "BAD_REMAP"
STALE_PLAN = "STALE_PLAN"

# Provenance / store
SEVEN_W_INCOMPLETE = "SEVEN_W_INCOMPLETE"
STORE_FAILURE = "STORE_FAILURE"
IO_FAILURE = "IO_FAILURE"
CORRUPT = "CORRUPT"
FOLD_GAP = "FOLD_GAP"
FOLD_ILLEGAL = "FOLD_ILLEGAL"

# Server
BIND_FAILURE = "BIND_FAILURE"
NOT_FOUND = "NOT_FOUND"
