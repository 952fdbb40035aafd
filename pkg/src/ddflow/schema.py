"""Outcome schemas: a small, closed schema language plus validator.

Schemas describe the documents submitted when completing an activity and
drive form generation in the operator console.  The language is a strict
subset: seven field kinds, explicit bounds, and unknown keys rejected on
both the schema side and the document side, so every recorded outcome is
fully described by its schema.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any

from .errors import EngineError, SCHEMA_PARSE

KINDS = ("string", "integer", "number", "boolean", "enum", "object", "array")

# Schema-document keys legal for each kind, beyond "kind" itself.
_KIND_KEYS = {
    "string": {"minLength", "maxLength"},
    "integer": {"min", "max"},
    "number": {"min", "max"},
    "boolean": set(),
    "enum": {"values"},
    "object": {"fields", "required"},
    "array": {"items"},
}

REQUIRED_MISSING = "REQUIRED_MISSING"
TYPE_MISMATCH = "TYPE_MISMATCH"
ENUM_VIOLATION = "ENUM_VIOLATION"
RANGE = "RANGE"
LENGTH = "LENGTH"
UNDECLARED_FIELD = "UNDECLARED_FIELD"


@dataclass(frozen=True)
class FieldSpec:
    kind: str
    values: tuple[str, ...] | None = None            # enum
    fields: dict[str, "FieldSpec"] | None = None     # object
    required: tuple[str, ...] | None = None          # object
    items: "FieldSpec | None" = None                 # array
    min: float | None = None                         # integer, number
    max: float | None = None
    min_length: int | None = None                    # string
    max_length: int | None = None

    def to_doc(self) -> dict:
        doc: dict[str, Any] = {"kind": self.kind}
        if self.kind == "enum":
            doc["values"] = list(self.values or ())
        elif self.kind == "object":
            doc["fields"] = {name: spec.to_doc() for name, spec in (self.fields or {}).items()}
            if self.required:
                doc["required"] = list(self.required)
        elif self.kind == "array":
            doc["items"] = self.items.to_doc() if self.items else None
        if self.min is not None:
            doc["min"] = self.min
        if self.max is not None:
            doc["max"] = self.max
        if self.min_length is not None:
            doc["minLength"] = self.min_length
        if self.max_length is not None:
            doc["maxLength"] = self.max_length
        return doc


@dataclass(frozen=True)
class Schema:
    root: FieldSpec

    def to_doc(self) -> dict:
        return self.root.to_doc()


@dataclass
class Violation:
    path: str
    code: str
    detail: str

    def to_doc(self) -> dict:
        return {"path": self.path, "code": self.code, "detail": self.detail}


@dataclass
class ValidationReport:
    violations: list[Violation] = field(default_factory=list)

    @property
    def valid(self) -> bool:
        return not self.violations

    def to_doc(self) -> dict:
        return {"violations": [v.to_doc() for v in self.violations]}


def _parse_error(path: str, reason: str) -> EngineError:
    return EngineError(SCHEMA_PARSE, f"{path or '/'}: {reason}",
                       detail={"path": path, "reason": reason})


def _require_int(value: Any, path: str, key: str) -> int:
    if type(value) is bool or not isinstance(value, int):
        raise _parse_error(path, f"{key} must be an integer")
    return value


def _require_num(value: Any, path: str, key: str) -> float:
    if type(value) is bool or not isinstance(value, (int, float)):
        raise _parse_error(path, f"{key} must be a number")
    if isinstance(value, float) and not math.isfinite(value):
        raise _parse_error(path, f"{key} must be finite")
    return value


def _parse_field(doc: Any, path: str) -> FieldSpec:
    if not isinstance(doc, dict):
        raise _parse_error(path, "field spec must be an object")
    kind = doc.get("kind")
    if kind not in KINDS:
        raise _parse_error(path, f"unknown kind {kind!r}")
    extra = set(doc) - {"kind"} - _KIND_KEYS[kind]
    if extra:
        raise _parse_error(path, f"keys {sorted(extra)} not allowed for kind {kind!r}")

    if kind == "enum":
        values = doc.get("values")
        if not isinstance(values, list) or not values:
            raise _parse_error(path, "enum requires a non-empty values list")
        if any(not isinstance(v, str) for v in values):
            raise _parse_error(path, "enum values must be strings")
        if len(set(values)) != len(values):
            raise _parse_error(path, "enum values must be unique")
        return FieldSpec(kind="enum", values=tuple(values))

    if kind == "object":
        fields_doc = doc.get("fields", {})
        if not isinstance(fields_doc, dict):
            raise _parse_error(path, "fields must be an object")
        fields = {name: _parse_field(spec, f"{path}/{name}")
                  for name, spec in fields_doc.items()}
        required = doc.get("required", [])
        if not isinstance(required, list) or any(not isinstance(r, str) for r in required):
            raise _parse_error(f"{path}/required", "required must be a list of names")
        if len(set(required)) != len(required):
            raise _parse_error(f"{path}/required", "required names must be unique")
        undeclared = [r for r in required if r not in fields]
        if undeclared:
            raise _parse_error(f"{path}/required", f"undeclared names {undeclared}")
        return FieldSpec(kind="object", fields=fields, required=tuple(required))

    if kind == "array":
        if "items" not in doc:
            raise _parse_error(path, "array requires items")
        return FieldSpec(kind="array", items=_parse_field(doc["items"], f"{path}/items"))

    if kind in ("integer", "number"):
        lo = hi = None
        if "min" in doc:
            lo = (_require_int(doc["min"], path, "min") if kind == "integer"
                  else _require_num(doc["min"], path, "min"))
        if "max" in doc:
            hi = (_require_int(doc["max"], path, "max") if kind == "integer"
                  else _require_num(doc["max"], path, "max"))
        if lo is not None and hi is not None and lo > hi:
            raise _parse_error(path, "min exceeds max")
        return FieldSpec(kind=kind, min=lo, max=hi)

    if kind == "string":
        lo = hi = None
        if "minLength" in doc:
            lo = _require_int(doc["minLength"], path, "minLength")
            if lo < 0:
                raise _parse_error(path, "minLength must be non-negative")
        if "maxLength" in doc:
            hi = _require_int(doc["maxLength"], path, "maxLength")
            if hi < 0:
                raise _parse_error(path, "maxLength must be non-negative")
        if lo is not None and hi is not None and lo > hi:
            raise _parse_error(path, "minLength exceeds maxLength")
        return FieldSpec(kind="string", min_length=lo, max_length=hi)

    return FieldSpec(kind="boolean")


def parse_schema(doc: Any) -> Schema:
    """Parse a schema document; the root must be an object spec."""
    root = _parse_field(doc, "")
    if root.kind != "object":
        raise _parse_error("", "schema root must be an object")
    return Schema(root=root)


def _type_name(value: Any) -> str:
    if type(value) is bool:
        return "boolean"
    if isinstance(value, int):
        return "integer"
    if isinstance(value, float):
        return "number"
    if isinstance(value, str):
        return "string"
    if isinstance(value, list):
        return "array"
    if isinstance(value, dict):
        return "object"
    if value is None:
        return "null"
    return type(value).__name__


def _check(spec: FieldSpec, value: Any, path: str, out: list[Violation]) -> None:
    kind = spec.kind

    if kind == "boolean":
        if type(value) is not bool:
            out.append(Violation(path, TYPE_MISMATCH, f"expected boolean, got {_type_name(value)}"))
        return

    if kind in ("integer", "number"):
        if type(value) is bool or not isinstance(value, (int, float)):
            out.append(Violation(path, TYPE_MISMATCH, f"expected {kind}, got {_type_name(value)}"))
            return
        if isinstance(value, float) and not math.isfinite(value):
            out.append(Violation(path, TYPE_MISMATCH, f"expected finite {kind}"))
            return
        if kind == "integer" and isinstance(value, float) and not value.is_integer():
            out.append(Violation(path, TYPE_MISMATCH, "expected integral value"))
            return
        if spec.min is not None and value < spec.min:
            out.append(Violation(path, RANGE, f"value {value} below min {spec.min}"))
        if spec.max is not None and value > spec.max:
            out.append(Violation(path, RANGE, f"value {value} above max {spec.max}"))
        return

    if kind == "string":
        if not isinstance(value, str):
            out.append(Violation(path, TYPE_MISMATCH, f"expected string, got {_type_name(value)}"))
            return
        if spec.min_length is not None and len(value) < spec.min_length:
            out.append(Violation(path, LENGTH, f"length {len(value)} below minLength {spec.min_length}"))
        if spec.max_length is not None and len(value) > spec.max_length:
            out.append(Violation(path, LENGTH, f"length {len(value)} above maxLength {spec.max_length}"))
        return

    if kind == "enum":
        if not isinstance(value, str):
            out.append(Violation(path, TYPE_MISMATCH, f"expected string, got {_type_name(value)}"))
            return
        if value not in (spec.values or ()):
            out.append(Violation(path, ENUM_VIOLATION, f"{value!r} not in {list(spec.values or ())}"))
        return

    if kind == "object":
        if not isinstance(value, dict):
            out.append(Violation(path, TYPE_MISMATCH, f"expected object, got {_type_name(value)}"))
            return
        fields = spec.fields or {}
        for name in spec.required or ():
            if name not in value:
                out.append(Violation(f"{path}/{name}", REQUIRED_MISSING, "required field missing"))
        for name, item in value.items():
            if name not in fields:
                out.append(Violation(f"{path}/{name}", UNDECLARED_FIELD, "field not declared"))
                continue
            _check(fields[name], item, f"{path}/{name}", out)
        return

    if kind == "array":
        if not isinstance(value, list):
            out.append(Violation(path, TYPE_MISMATCH, f"expected array, got {_type_name(value)}"))
            return
        for i, item in enumerate(value):
            _check(spec.items, item, f"{path}/{i}", out)  # type: ignore[arg-type]
        return


def validate_outcome(schema: Schema, outcome: Any) -> ValidationReport:
    """Structurally validate an outcome document against a parsed schema."""
    violations: list[Violation] = []
    _check(schema.root, outcome, "", violations)
    violations.sort(key=lambda v: (v.path, v.code, v.detail))
    return ValidationReport(violations=violations)
