import copy

import pytest

from conftest import order_bundle
from ddflow import provenance as pv
from ddflow.errors import (
    DANGLING_REF,
    FOLD_GAP,
    FOLD_ILLEGAL,
    PARSE_ERROR,
    EngineError,
)
from ddflow.model import Item, apply_event, check_value, fold_events, parse_bundle

ORDER = order_bundle(1)


def resolver(name, version):
    assert name == "Order"
    return parse_bundle(ORDER)


def ev(seq, what, payload, when="2020-05-01T12:00:00.000Z"):
    return pv.Event(item_id="item-1", seq=seq, what=what, when=when, who="alice",
                    how="test", where="node-a", which="Order@1", payload=payload)


def created(seq=1):
    return ev(seq, pv.ITEM_CREATED,
              {"kind": "item", "name": "o-1", "description": "Order", "version": 1,
               "properties": {"total": 0.0, "status": "new", "sku": "SKU-1"}})


# -- value checks ----------------------------------------------------------

def test_check_value_number_rejects_bool():
    assert check_value("number", 1) is True
    assert check_value("number", 1.5) is True
    assert check_value("number", True) is False
    assert check_value("string", "x") is True
    assert check_value("string", 3) is False
    assert check_value("boolean", False) is True
    assert check_value("boolean", 0) is False


# -- bundle parsing --------------------------------------------------------

def test_order_bundle_parses():
    desc = parse_bundle(ORDER)
    assert desc.name == "Order"
    assert set(desc.properties) == {"total", "status", "sku"}
    assert desc.properties["sku"].mutable is False
    assert set(desc.schemas) == {"review", "approve", "pack"}
    assert "tallyReview" in desc.consequence_scripts
    assert desc.version == 0


def test_unknown_schema_ref_is_dangling():
    doc = copy.deepcopy(ORDER)
    doc["workflow"]["activities"][0]["schemaRef"] = "nope"
    with pytest.raises(EngineError) as err:
        parse_bundle(doc)
    assert err.value.code == DANGLING_REF
    assert err.value.detail["missing"][0] == {
        "activity": "Review", "kind": "schema", "ref": "nope"}


def test_unknown_consequence_ref_is_dangling():
    doc = copy.deepcopy(ORDER)
    doc["workflow"]["activities"][0]["consequence"] = "ghost"
    with pytest.raises(EngineError) as err:
        parse_bundle(doc)
    assert err.value.code == DANGLING_REF


def test_guard_source_must_parse():
    doc = copy.deepcopy(ORDER)
    doc["scripts"]["tallyReview"] = "set total = outcome.qty *"
    with pytest.raises(EngineError) as err:
        parse_bundle(doc)
    assert err.value.code == PARSE_ERROR
    assert "tallyReview" in err.value.message


def test_duplicate_property_rejected():
    doc = copy.deepcopy(ORDER)
    doc["properties"].append(dict(doc["properties"][0]))
    with pytest.raises(EngineError) as err:
        parse_bundle(doc)
    assert err.value.code == PARSE_ERROR


def test_initial_value_must_fit_type():
    doc = copy.deepcopy(ORDER)
    doc["properties"][0]["initial"] = "zero"
    with pytest.raises(EngineError) as err:
        parse_bundle(doc)
    assert err.value.code == PARSE_ERROR


def test_unknown_bundle_key_rejected():
    doc = copy.deepcopy(ORDER)
    doc["extras"] = []
    with pytest.raises(EngineError) as err:
        parse_bundle(doc)
    assert err.value.code == PARSE_ERROR


def test_collections_need_allowed_descriptions():
    doc = copy.deepcopy(ORDER)
    doc["collections"] = [{"name": "parts", "allowedDescriptions": []}]
    with pytest.raises(EngineError) as err:
        parse_bundle(doc)
    assert err.value.code == PARSE_ERROR


def test_parse_leaves_bundle_doc_attached():
    desc = parse_bundle(ORDER)
    assert desc.bundle_doc is ORDER


# -- event documents -------------------------------------------------------

def test_event_doc_roundtrip():
    event = created()
    assert pv.Event.from_doc(event.to_doc()) == event


def test_event_doc_rejects_wrong_keys():
    doc = created().to_doc()
    del doc["who"]
    with pytest.raises(EngineError) as err:
        pv.Event.from_doc(doc)
    assert err.value.code == PARSE_ERROR


# -- the fold --------------------------------------------------------------

def test_item_created_builds_initial_state():
    item = apply_event(None, created(), resolver)
    assert item.kind == "item"
    assert item.properties == {"total": 0.0, "status": "new", "sku": "SKU-1"}
    assert item.marking.to_doc()["tokens"] == {"Review": [1]}
    assert item.finished is False
    assert item.last_event_seq == 1


def test_first_event_must_be_creation():
    with pytest.raises(EngineError) as err:
        apply_event(None, ev(1, pv.PROPERTY_SET, {"name": "total", "value": 1.0}), resolver)
    assert err.value.code == FOLD_GAP


def test_first_event_must_have_seq_one():
    with pytest.raises(EngineError) as err:
        apply_event(None, created(seq=2), resolver)
    assert err.value.code == FOLD_GAP


def test_second_creation_is_illegal():
    item = apply_event(None, created(), resolver)
    with pytest.raises(EngineError) as err:
        apply_event(item, created(seq=2), resolver)
    assert err.value.code == FOLD_ILLEGAL


def test_sequence_gap_detected():
    item = apply_event(None, created(), resolver)
    with pytest.raises(EngineError) as err:
        apply_event(item, ev(3, pv.PROPERTY_SET, {"name": "total", "value": 1.0}), resolver)
    assert err.value.code == FOLD_GAP
    assert err.value.detail == {"seq": 3, "expected": 2}


def test_empty_log_is_a_gap():
    with pytest.raises(EngineError) as err:
        fold_events([], resolver)
    assert err.value.code == FOLD_GAP


def test_property_set_applies():
    item = fold_events([created(),
                        ev(2, pv.PROPERTY_SET, {"name": "total", "value": 14.0})],
                       resolver)
    assert item.properties["total"] == 14.0
    assert item.last_event_seq == 2


def test_outcome_recorded_is_stateless():
    before = apply_event(None, created(), resolver).to_doc()
    item = fold_events([created(),
                        ev(2, pv.OUTCOME_RECORDED,
                           {"activity": "Review", "outcome": {"qty": 7, "priority": "high"}})],
                       resolver)
    after = item.to_doc()
    after["lastEventSeq"] = 1
    assert after == before


def test_job_executed_advances_marking():
    item = fold_events([created(),
                        ev(2, pv.JOB_EXECUTED,
                           {"activity": "Review", "decisions": []})],
                       resolver)
    assert item.marking.to_doc()["tokens"] == {"Approve": [2]}
    assert item.finished is False


def test_job_without_token_is_illegal():
    item = apply_event(None, created(), resolver)
    with pytest.raises(EngineError) as err:
        apply_event(item, ev(2, pv.JOB_EXECUTED, {"activity": "Approve", "decisions": []}),
                    resolver)
    assert err.value.code == FOLD_ILLEGAL


def test_unused_decisions_are_illegal():
    with pytest.raises(EngineError) as err:
        fold_events([created(),
                     ev(2, pv.JOB_EXECUTED,
                        {"activity": "Review", "decisions": [["Review", "Approve"]]})],
                    resolver)
    assert err.value.code == FOLD_ILLEGAL


def test_completion_flag_follows_marking():
    item = fold_events([created(),
                        ev(2, pv.JOB_EXECUTED, {"activity": "Review", "decisions": []}),
                        ev(3, pv.JOB_EXECUTED, {"activity": "Approve", "decisions": []})],
                       resolver)
    assert item.finished is True
    assert item.marking.to_doc()["tokens"] == {"End": [3]}


def test_fold_matches_incremental_application():
    events = [created(),
              ev(2, pv.PROPERTY_SET, {"name": "status", "value": "seen"}),
              ev(3, pv.JOB_EXECUTED, {"activity": "Review", "decisions": []})]
    folded = fold_events(events, resolver).to_doc()
    item = None
    for event in events:
        item = apply_event(item, event, resolver)
    assert item.to_doc() == folded


# -- collections -----------------------------------------------------------

PART_ORDER = {
    "name": "Order",
    "properties": [],
    "collections": [{"name": "parts", "allowedDescriptions": ["Part"]}],
    "schemas": {"review": {"kind": "object", "fields": {}}},
    "workflow": {
        "activities": [
            {"name": "Review", "kind": "elementary", "role": "op", "schemaRef": "review"},
        ],
        "edges": [["Start", "Review"], ["Review", "End"]],
    },
}


def part_resolver(name, version):
    return parse_bundle(PART_ORDER)


def part_created():
    return ev(1, pv.ITEM_CREATED,
              {"kind": "item", "name": "o-1", "description": "Order", "version": 1,
               "properties": {}})


def member(seq, op, member_id):
    return ev(seq, pv.COLLECTION_CHANGED,
              {"collection": "parts", "op": op, "member": member_id})


def test_collection_membership_ops():
    item = fold_events([part_created(),
                        member(2, "add", "p-1"),
                        member(3, "add", "p-2"),
                        member(4, "remove", "p-1")],
                       part_resolver)
    assert item.collections == {"parts": ["p-2"]}


def test_duplicate_add_is_illegal():
    item = fold_events([part_created(), member(2, "add", "p-1")], part_resolver)
    with pytest.raises(EngineError) as err:
        apply_event(item, member(3, "add", "p-1"), part_resolver)
    assert err.value.code == FOLD_ILLEGAL


def test_remove_of_absent_member_is_illegal():
    item = fold_events([part_created()], part_resolver)
    with pytest.raises(EngineError) as err:
        apply_event(item, member(2, "remove", "p-9"), part_resolver)
    assert err.value.code == FOLD_ILLEGAL


def test_unknown_collection_is_illegal():
    item = fold_events([part_created()], part_resolver)
    bad = ev(2, pv.COLLECTION_CHANGED, {"collection": "boxes", "op": "add", "member": "x"})
    with pytest.raises(EngineError) as err:
        apply_event(item, bad, part_resolver)
    assert err.value.code == FOLD_ILLEGAL


# -- item documents --------------------------------------------------------

def test_item_doc_roundtrip():
    item = fold_events([created(),
                        ev(2, pv.JOB_EXECUTED, {"activity": "Review", "decisions": []})],
                       resolver)
    assert Item.from_doc(item.to_doc()).to_doc() == item.to_doc()


def test_summary_doc_shape():
    item = apply_event(None, created(), resolver)
    assert item.summary_doc() == {
        "id": "item-1", "name": "o-1", "descriptionName": "Order",
        "descriptionVersion": 1, "kind": "item", "finished": False, "lastEventSeq": 1}
