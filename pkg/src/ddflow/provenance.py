"""Events and their provenance projection.

Every state change is an appended event answering seven questions: what
happened, when, who caused it, how (the operation), where (the node),
which (the governing description version), and optionally why.  The
first six must always be present; `why` is free text.

`export_prov` projects an item's log onto a W3C-PROV-shaped document:
outcomes become entities generated by job activities, agents hang off
the jobs that executed them, and consecutive outcomes form a derivation
chain.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

from .errors import EngineError, PARSE_ERROR, SEVEN_W_INCOMPLETE
from .identity import is_timestamp

ITEM_CREATED = "ItemCreated"
VERSION_CREATED = "VersionCreated"
OUTCOME_RECORDED = "OutcomeRecorded"
JOB_EXECUTED = "JobExecuted"
PROPERTY_SET = "PropertySet"
COLLECTION_CHANGED = "CollectionChanged"
MIGRATION_APPLIED = "MigrationApplied"

EVENT_TYPES = (ITEM_CREATED, VERSION_CREATED, OUTCOME_RECORDED, JOB_EXECUTED,
               PROPERTY_SET, COLLECTION_CHANGED, MIGRATION_APPLIED)

_EVENT_KEYS = {"itemId", "seq", "what", "when", "who", "how", "where", "which", "why", "payload"}


@dataclass(frozen=True)
class Event:
    item_id: str
    seq: int
    what: str
    when: str
    who: str
    how: str
    where: str
    which: str
    payload: dict
    why: str | None = None

    def to_doc(self) -> dict:
        return {"itemId": self.item_id, "seq": self.seq, "what": self.what,
                "when": self.when, "who": self.who, "how": self.how,
                "where": self.where, "which": self.which, "why": self.why,
                "payload": self.payload}

    @staticmethod
    def from_doc(doc: dict) -> "Event":
        if not isinstance(doc, dict) or set(doc) != _EVENT_KEYS:
            raise EngineError(PARSE_ERROR, "event document has wrong keys",
                              detail={"keys": sorted(doc) if isinstance(doc, dict) else None})
        return Event(item_id=doc["itemId"], seq=doc["seq"], what=doc["what"],
                     when=doc["when"], who=doc["who"], how=doc["how"],
                     where=doc["where"], which=doc["which"], why=doc["why"],
                     payload=doc["payload"])


def validate_event(event: Event) -> None:
    """Mandatory-answer check: all questions but why must have answers."""
    if event.what not in EVENT_TYPES:
        raise EngineError(SEVEN_W_INCOMPLETE, f"unknown event type {event.what!r}",
                          detail={"field": "what"})
    if not isinstance(event.seq, int) or isinstance(event.seq, bool) or event.seq < 1:
        raise EngineError(SEVEN_W_INCOMPLETE, "seq must be a positive integer",
                          detail={"field": "seq"})
    for name in ("itemId", "when", "who", "how", "where", "which"):
        attr = "item_id" if name == "itemId" else name
        value = getattr(event, attr)
        if not isinstance(value, str) or not value:
            raise EngineError(SEVEN_W_INCOMPLETE, f"{name} must be a non-empty string",
                              detail={"field": name})
    if not is_timestamp(event.when):
        raise EngineError(SEVEN_W_INCOMPLETE, f"when is not a valid timestamp: {event.when!r}",
                          detail={"field": "when"})
    if event.why is not None and not isinstance(event.why, str):
        raise EngineError(SEVEN_W_INCOMPLETE, "why must be a string when present",
                          detail={"field": "why"})
    if not isinstance(event.payload, dict):
        raise EngineError(SEVEN_W_INCOMPLETE, "payload must be an object",
                          detail={"field": "payload"})


def query_events(events: Iterable[Event], what: str | None = None, who: str | None = None,
                 time_from: str | None = None, time_to: str | None = None) -> list[Event]:
    """Conjunctive filter; time bounds are inclusive.  The timestamp format
    is fixed-width so plain string comparison orders correctly."""
    picked = []
    for ev in events:
        if what is not None and ev.what != what:
            continue
        if who is not None and ev.who != who:
            continue
        if time_from is not None and ev.when < time_from:
            continue
        if time_to is not None and ev.when > time_to:
            continue
        picked.append(ev)
    picked.sort(key=lambda ev: (ev.item_id, ev.seq))
    return picked


def export_prov(item_id: str, events: Iterable[Event]) -> dict:
    """Provenance document for one item's log.

    Entities: the item plus one per recorded outcome.  Activities: one per
    executed job, bounded by its event timestamp.  Each job generated the
    outcome recorded just before it and used the outcome of the previous
    job, which also chains outcomes with wasDerivedFrom.
    """
    entity: dict[str, dict] = {}
    activity: dict[str, dict] = {}
    agent: dict[str, dict] = {}
    was_generated_by: list[dict] = []
    used: list[dict] = []
    was_associated_with: list[dict] = []
    was_derived_from: list[dict] = []

    item_entity = f"item:{item_id}"
    item_attrs: dict = {"type": "item"}
    entity[item_entity] = item_attrs

    pending_outcome: str | None = None
    last_outcome: str | None = None
    prev_outcome_any: str | None = None

    for ev in sorted(events, key=lambda e: e.seq):
        if ev.what == ITEM_CREATED:
            item_attrs["name"] = ev.payload.get("name")
        elif ev.what == OUTCOME_RECORDED:
            oid = f"outcome:{item_id}:{ev.seq}"
            entity[oid] = {"type": "outcome", "activity": ev.payload.get("activity"),
                           "schema": ev.payload.get("schema")}
            if prev_outcome_any is not None:
                was_derived_from.append({"generated": oid, "usedEntity": prev_outcome_any})
            prev_outcome_any = oid
            pending_outcome = oid
        elif ev.what == JOB_EXECUTED:
            aid = f"job:{item_id}:{ev.seq}"
            activity[aid] = {"startTime": ev.when, "endTime": ev.when}
            gid = f"agent:{ev.who}"
            agent.setdefault(gid, {})
            was_associated_with.append({"activity": aid, "agent": gid})
            if pending_outcome is not None:
                was_generated_by.append({"entity": pending_outcome, "activity": aid})
            if last_outcome is not None:
                used.append({"activity": aid, "entity": last_outcome})
            if pending_outcome is not None:
                last_outcome = pending_outcome
            pending_outcome = None

    return {"entity": entity, "activity": activity, "agent": agent,
            "wasGeneratedBy": was_generated_by, "used": used,
            "wasAssociatedWith": was_associated_with, "wasDerivedFrom": was_derived_from}
