import math
import random

import pytest

import oracles
from ddflow.errors import SCHEMA_PARSE, EngineError
from ddflow.schema import parse_schema, validate_outcome
from generators import random_document, random_schema

COUNT_SCHEMA = {"kind": "object",
                "fields": {"count": {"kind": "integer", "min": 0}},
                "required": ["count"]}


def violations(schema_doc, outcome):
    report = validate_outcome(parse_schema(schema_doc), outcome)
    return sorted((v.path, v.code) for v in report.violations)


# -- parsing ---------------------------------------------------------------

def test_required_integer_parses():
    schema = parse_schema(COUNT_SCHEMA)
    assert schema.root.kind == "object"
    assert schema.root.required == ("count",)
    assert schema.root.fields["count"].kind == "integer"


def test_required_must_name_declared_fields():
    doc = {"kind": "object", "fields": {"count": {"kind": "integer"}}, "required": ["qty"]}
    with pytest.raises(EngineError) as err:
        parse_schema(doc)
    assert err.value.code == SCHEMA_PARSE
    assert err.value.detail["path"] == "/required"


def test_enum_requires_values():
    doc = {"kind": "object", "fields": {"c": {"kind": "enum", "values": []}}}
    with pytest.raises(EngineError) as err:
        parse_schema(doc)
    assert err.value.code == SCHEMA_PARSE
    assert err.value.detail["path"] == "/c"


def test_enum_values_must_be_unique():
    doc = {"kind": "object", "fields": {"c": {"kind": "enum", "values": ["a", "a"]}}}
    with pytest.raises(EngineError):
        parse_schema(doc)


def test_unknown_keys_rejected_per_kind():
    doc = {"kind": "object", "fields": {"c": {"kind": "boolean", "min": 1}}}
    with pytest.raises(EngineError):
        parse_schema(doc)


def test_min_above_max_rejected():
    doc = {"kind": "object", "fields": {"c": {"kind": "integer", "min": 5, "max": 1}}}
    with pytest.raises(EngineError):
        parse_schema(doc)


def test_root_must_be_object():
    with pytest.raises(EngineError):
        parse_schema({"kind": "integer"})


def test_array_requires_items():
    doc = {"kind": "object", "fields": {"c": {"kind": "array"}}}
    with pytest.raises(EngineError):
        parse_schema(doc)


def test_integer_bounds_must_be_integers():
    doc = {"kind": "object", "fields": {"c": {"kind": "integer", "min": 1.5}}}
    with pytest.raises(EngineError):
        parse_schema(doc)


# -- validation ------------------------------------------------------------

def test_valid_document():
    assert violations(COUNT_SCHEMA, {"count": 5}) == []


def test_wrong_type_at_path():
    assert violations(COUNT_SCHEMA, {"count": "five"}) == [("/count", "TYPE_MISMATCH")]


def test_below_min_and_non_integral():
    assert violations(COUNT_SCHEMA, {"count": -1}) == [("/count", "RANGE")]
    assert violations(COUNT_SCHEMA, {"count": 2.5}) == [("/count", "TYPE_MISMATCH")]


def test_integral_float_accepted():
    assert violations(COUNT_SCHEMA, {"count": 5.0}) == []


def test_required_missing():
    assert violations(COUNT_SCHEMA, {}) == [("/count", "REQUIRED_MISSING")]


def test_undeclared_field():
    assert violations(COUNT_SCHEMA, {"count": 1, "extra": 2}) == [("/extra", "UNDECLARED_FIELD")]


def test_boolean_is_not_a_number():
    assert violations(COUNT_SCHEMA, {"count": True}) == [("/count", "TYPE_MISMATCH")]


def test_nan_and_infinity_rejected():
    doc = {"kind": "object", "fields": {"x": {"kind": "number"}}, "required": ["x"]}
    assert violations(doc, {"x": math.nan}) == [("/x", "TYPE_MISMATCH")]
    assert violations(doc, {"x": math.inf}) == [("/x", "TYPE_MISMATCH")]


def test_string_length_bounds():
    doc = {"kind": "object",
           "fields": {"s": {"kind": "string", "minLength": 2, "maxLength": 3}}}
    assert violations(doc, {"s": "a"}) == [("/s", "LENGTH")]
    assert violations(doc, {"s": "abcd"}) == [("/s", "LENGTH")]
    assert violations(doc, {"s": "ab"}) == []


def test_enum_membership():
    doc = {"kind": "object", "fields": {"e": {"kind": "enum", "values": ["low", "high"]}}}
    assert violations(doc, {"e": "mid"}) == [("/e", "ENUM_VIOLATION")]
    assert violations(doc, {"e": 3}) == [("/e", "TYPE_MISMATCH")]


def test_array_items_checked_by_index():
    doc = {"kind": "object",
           "fields": {"xs": {"kind": "array", "items": {"kind": "integer"}}}}
    assert violations(doc, {"xs": [1, "two", 3.5]}) == [
        ("/xs/1", "TYPE_MISMATCH"), ("/xs/2", "TYPE_MISMATCH")]


def test_nested_object_paths():
    doc = {"kind": "object",
           "fields": {"inner": {"kind": "object",
                                "fields": {"n": {"kind": "number", "max": 1}},
                                "required": ["n"]}},
           "required": ["inner"]}
    assert violations(doc, {"inner": {"n": 2}}) == [("/inner/n", "RANGE")]
    assert violations(doc, {"inner": {}}) == [("/inner/n", "REQUIRED_MISSING")]
    assert violations(doc, {"inner": 4}) == [("/inner", "TYPE_MISMATCH")]


def test_report_is_deterministic():
    doc = {"count": "x", "extra": 1, "more": 2}
    first = validate_outcome(parse_schema(COUNT_SCHEMA), doc).to_doc()
    second = validate_outcome(parse_schema(COUNT_SCHEMA), doc).to_doc()
    assert first == second
    paths = [v["path"] for v in first["violations"]]
    assert paths == sorted(paths)


# -- randomized agreement with the naive validator -------------------------

def test_random_pairs_agree_with_oracle():
    rng = random.Random(4007)
    for _ in range(300):
        schema_doc = random_schema(rng)
        doc = random_document(rng, schema_doc)
        mine = violations(schema_doc, doc)
        ref = oracles.naive_validate(schema_doc, doc)
        assert mine == ref, f"schema={schema_doc} doc={doc}"
