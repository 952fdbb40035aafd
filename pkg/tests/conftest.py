import copy

import pytest

from ddflow.engine import Engine
from ddflow.identity import FixedClock, IdGenerator
from ddflow.store import open_store


def make_engine(root, node="node-a", seed=7, start="2020-05-01T12:00:00.000Z"):
    store = open_store(str(root), node_name=node)
    return Engine(store, clock=FixedClock(start=start), ids=IdGenerator(seed=seed))


@pytest.fixture
def eng(tmp_path):
    engine = make_engine(tmp_path / "store")
    engine.register_agent("alice", "Alice", ["op", "qa"])
    engine.register_agent("bob", "Bob", ["op"])
    yield engine
    engine.store.close()


# The Order fixture family: v2 adds Pack after Approve, v3 renames Approve
# to Recheck (so an item resting on Approve has no image in v3).

_ORDER_BASE = {
    "name": "Order",
    "properties": [
        {"name": "total", "type": "number", "initial": 0, "mutable": True},
        {"name": "status", "type": "string", "initial": "new", "mutable": True},
        {"name": "sku", "type": "string", "initial": "unset", "mutable": False},
    ],
    "collections": [],
    "schemas": {
        "review": {"kind": "object",
                   "fields": {"qty": {"kind": "integer", "min": 0, "max": 100},
                              "priority": {"kind": "enum", "values": ["low", "high"]}},
                   "required": ["qty"]},
        "approve": {"kind": "object",
                    "fields": {"ok": {"kind": "boolean"}},
                    "required": ["ok"]},
        "pack": {"kind": "object",
                 "fields": {"boxes": {"kind": "integer", "min": 1}},
                 "required": ["boxes"]},
    },
    "scripts": {
        "tallyReview": 'set total = outcome.qty * 2; set status = "reviewed"',
    },
}


def order_bundle(version=1):
    doc = copy.deepcopy(_ORDER_BASE)
    review = {"name": "Review", "kind": "elementary", "role": "op",
              "schemaRef": "review", "consequence": "tallyReview"}
    approve = {"name": "Approve", "kind": "elementary", "role": "qa", "schemaRef": "approve"}
    pack = {"name": "Pack", "kind": "elementary", "role": "op", "schemaRef": "pack"}
    if version == 1:
        doc["workflow"] = {"activities": [review, approve],
                           "edges": [["Start", "Review"], ["Review", "Approve"],
                                     ["Approve", "End"]]}
    elif version == 2:
        doc["workflow"] = {"activities": [review, approve, pack],
                           "edges": [["Start", "Review"], ["Review", "Approve"],
                                     ["Approve", "Pack"], ["Pack", "End"]]}
    else:
        recheck = dict(approve, name="Recheck")
        doc["workflow"] = {"activities": [review, recheck, pack],
                           "edges": [["Start", "Review"], ["Review", "Recheck"],
                                     ["Recheck", "Pack"], ["Pack", "End"]]}
    return doc


ORDER_OUTCOMES = {
    "Review": {"qty": 7, "priority": "high"},
    "Approve": {"ok": True},
    "Recheck": {"ok": True},
    "Pack": {"boxes": 2},
}


def drive(engine, item_id, outcomes=ORDER_OUTCOMES, agent="alice", limit=500):
    """Execute the first available job until the item finishes."""
    for _ in range(limit):
        if engine.get_item(item_id).finished:
            return
        jobs = engine.list_jobs(item_id, agent)
        assert jobs, f"no executable job: {engine.get_item(item_id).marking.to_doc()}"
        job = jobs[0]
        local = job.activity.rpartition("/")[2]
        engine.execute_job(item_id, job.job_id, outcomes[local], agent)
    raise AssertionError("item did not finish within the step limit")
