import pytest

import oracles
from conftest import ORDER_OUTCOMES, drive, order_bundle
from ddflow import provenance as pv
from ddflow.canonical import dumps
from ddflow.errors import SEVEN_W_INCOMPLETE, EngineError


def ev(seq, what="PropertySet", when="2020-05-01T12:00:00.000Z", who="alice",
       how="set:x", where="node-a", which="Order/1", why=None, payload=None):
    return pv.Event(item_id="item-1", seq=seq, what=what, when=when, who=who,
                    how=how, where=where, which=which, why=why,
                    payload=payload if payload is not None else {})


# -- the mandatory answers -------------------------------------------------

def test_complete_event_validates():
    pv.validate_event(ev(1))


def test_why_is_optional():
    pv.validate_event(ev(1, why=None))
    pv.validate_event(ev(1, why="because"))


@pytest.mark.parametrize("field,bad", [
    ("what", "SomethingElse"),
    ("who", ""),
    ("how", ""),
    ("where", ""),
    ("which", ""),
    ("when", "yesterday"),
    ("when", "2020-05-01T12:00:00Z"),
])
def test_missing_answers_rejected(field, bad):
    with pytest.raises(EngineError) as err:
        pv.validate_event(ev(1, **{field: bad}))
    assert err.value.code == SEVEN_W_INCOMPLETE
    assert err.value.detail["field"] == field


def test_seq_must_be_positive_integer():
    for bad in (0, -1, 1.0, True):
        with pytest.raises(EngineError) as err:
            pv.validate_event(ev(bad))
        assert err.value.code == SEVEN_W_INCOMPLETE


# -- queries ---------------------------------------------------------------

QUERY_LOG = [
    ev(1, what="ItemCreated", when="2020-05-01T12:00:00.000Z", who="alice"),
    ev(2, what="OutcomeRecorded", when="2020-05-01T12:00:01.000Z", who="bob"),
    ev(3, what="JobExecuted", when="2020-05-01T12:00:02.000Z", who="bob"),
    ev(4, what="OutcomeRecorded", when="2020-05-01T12:00:03.000Z", who="alice"),
]


def test_filters_are_conjunctive():
    picked = pv.query_events(QUERY_LOG, what="OutcomeRecorded", who="bob")
    assert [e.seq for e in picked] == [2]


def test_time_bounds_inclusive():
    picked = pv.query_events(QUERY_LOG, time_from="2020-05-01T12:00:01.000Z",
                             time_to="2020-05-01T12:00:02.000Z")
    assert [e.seq for e in picked] == [2, 3]


def test_no_filters_returns_everything_ordered():
    shuffled = [QUERY_LOG[2], QUERY_LOG[0], QUERY_LOG[3], QUERY_LOG[1]]
    assert [e.seq for e in pv.query_events(shuffled)] == [1, 2, 3, 4]


# -- PROV export -----------------------------------------------------------

def one_job_log():
    return [
        ev(1, what="ItemCreated", payload={"name": "o-1"}),
        ev(2, what="OutcomeRecorded", when="2020-05-01T12:00:01.000Z",
           payload={"activity": "Review", "schema": "review", "outcome": {"qty": 1}}),
        ev(3, what="JobExecuted", when="2020-05-01T12:00:02.000Z", who="bob",
           payload={"activity": "Review", "jobId": "j1", "decisions": []}),
    ]


def test_single_job_export_shape():
    doc = pv.export_prov("item-1", one_job_log())
    assert doc["entity"] == {
        "item:item-1": {"type": "item", "name": "o-1"},
        "outcome:item-1:2": {"type": "outcome", "activity": "Review",
                             "schema": "review"},
    }
    assert doc["activity"] == {
        "job:item-1:3": {"startTime": "2020-05-01T12:00:02.000Z",
                         "endTime": "2020-05-01T12:00:02.000Z"}}
    assert doc["agent"] == {"agent:bob": {}}
    assert doc["wasGeneratedBy"] == [
        {"entity": "outcome:item-1:2", "activity": "job:item-1:3"}]
    assert doc["wasAssociatedWith"] == [
        {"activity": "job:item-1:3", "agent": "agent:bob"}]
    assert doc["used"] == []
    assert doc["wasDerivedFrom"] == []


def test_second_job_uses_and_derives():
    log = one_job_log() + [
        ev(4, what="OutcomeRecorded", when="2020-05-01T12:00:03.000Z",
           payload={"activity": "Approve", "schema": "approve", "outcome": {}}),
        ev(5, what="JobExecuted", when="2020-05-01T12:00:04.000Z", who="bob",
           payload={"activity": "Approve", "jobId": "j2", "decisions": []}),
    ]
    doc = pv.export_prov("item-1", log)
    assert doc["used"] == [
        {"activity": "job:item-1:5", "entity": "outcome:item-1:2"}]
    assert doc["wasDerivedFrom"] == [
        {"generated": "outcome:item-1:4", "usedEntity": "outcome:item-1:2"}]
    assert len(doc["wasGeneratedBy"]) == 2


def test_agents_deduplicate():
    log = one_job_log() + [
        ev(4, what="OutcomeRecorded", when="2020-05-01T12:00:03.000Z",
           payload={"activity": "Approve", "schema": "approve", "outcome": {}}),
        ev(5, what="JobExecuted", when="2020-05-01T12:00:04.000Z", who="bob",
           payload={"activity": "Approve", "jobId": "j2", "decisions": []}),
    ]
    doc = pv.export_prov("item-1", log)
    assert list(doc["agent"]) == ["agent:bob"]


def test_export_is_insensitive_to_event_order():
    log = one_job_log()
    assert pv.export_prov("item-1", list(reversed(log))) == pv.export_prov("item-1", log)


# -- against a real run ----------------------------------------------------

def test_export_matches_counting_walk(eng):
    eng.register_description(order_bundle(1), "alice")
    eng.register_description(order_bundle(2), "alice")
    item = eng.instantiate_item("Order", 2, "o-1", agent_id="alice")
    drive(eng, item.id)

    events = eng.events_for(item.id)
    for event in events:
        pv.validate_event(event)
    doc = eng.prov_for(item.id)
    expect = oracles.prov_counts([e.to_doc() for e in events])
    assert len(doc["activity"]) == expect["activity"]
    assert len(doc["entity"]) == expect["entity"]
    assert len(doc["agent"]) == expect["agent"]
    assert len(doc["wasGeneratedBy"]) == expect["wasGeneratedBy"]
    assert len(doc["wasAssociatedWith"]) == expect["wasAssociatedWith"]
    assert len(doc["used"]) == expect["used"]
    assert len(doc["wasDerivedFrom"]) == expect["wasDerivedFrom"]


def test_export_bytes_stable_across_runs(eng):
    eng.register_description(order_bundle(1), "alice")
    item = eng.instantiate_item("Order", 1, "o-1", agent_id="alice")
    drive(eng, item.id)
    assert dumps(eng.prov_for(item.id)) == dumps(eng.prov_for(item.id))


def test_query_equals_transcript(eng):
    eng.register_description(order_bundle(1), "alice")
    item = eng.instantiate_item("Order", 1, "o-1", agent_id="alice")
    drive(eng, item.id)
    transcript = eng.store.read_events(item.id)
    assert eng.events_for(item.id) == sorted(transcript, key=lambda e: e.seq)
    by_alice = eng.events_for(item.id, who="alice")
    assert by_alice == [e for e in eng.events_for(item.id) if e.who == "alice"]
    recorded = eng.events_for(item.id, what=pv.OUTCOME_RECORDED)
    assert [e.seq for e in recorded] == [2, 6]
