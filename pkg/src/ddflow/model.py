"""The meta-model: descriptions, items, and the event fold.

Descriptions are published as bundles: one JSON document carrying typed
property declarations, collections, outcome schemas, scripts, and the
workflow graph.  Items are never stored as state; an item is whatever
folding its event log yields, and the same fold runs during live
execution and during replay, so the two can never disagree.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Callable

from . import provenance as pv
from . import workflow as wf
from .errors import (DANGLING_REF, EngineError, FOLD_GAP, FOLD_ILLEGAL, PARSE_ERROR,
                     SCHEMA_PARSE, SYNTAX)
from .migration import MigrationPlan, rewrite_marking
from .schema import Schema, parse_schema
from .scripting import Script, parse_script

PROPERTY_TYPES = ("string", "number", "boolean")

# Pseudo description name under which description items themselves live.
DESCRIPTION_REGISTRY = "@descriptions"


@dataclass(frozen=True)
class PropertyDef:
    name: str
    type: str
    initial: Any
    mutable: bool


@dataclass(frozen=True)
class CollectionDef:
    name: str
    allowed_descriptions: tuple[str, ...]


@dataclass
class ItemDescription:
    name: str
    version: int
    bundle_doc: dict
    properties: dict[str, PropertyDef]
    collections: dict[str, CollectionDef]
    schemas: dict[str, Schema]
    scripts: dict[str, str]
    guard_scripts: dict[str, Script]
    consequence_scripts: dict[str, Script]
    workflow: wf.WorkflowDef
    flat: wf.FlatGraph

    def initial_properties(self) -> dict[str, Any]:
        return {name: p.initial for name, p in self.properties.items()}


Resolver = Callable[[str, int], ItemDescription]


def check_value(type_name: str, value: Any) -> bool:
    if type_name == "string":
        return isinstance(value, str)
    if type_name == "boolean":
        return type(value) is bool
    if type_name == "number":
        if type(value) is bool or not isinstance(value, (int, float)):
            return False
        return math.isfinite(value)
    return False


# -- bundle parsing -------------------------------------------------------

def _fail(at: str, reason: str) -> EngineError:
    return EngineError(PARSE_ERROR, f"{at}: {reason}", detail={"at": at, "reason": reason})


def _expect_keys(doc: dict, at: str, required: set[str], optional: set[str] = frozenset()) -> None:
    if not isinstance(doc, dict):
        raise _fail(at, "expected an object")
    unknown = set(doc) - required - optional
    if unknown:
        raise _fail(at, f"unknown keys {sorted(unknown)}")
    missing = required - set(doc)
    if missing:
        raise _fail(at, f"missing keys {sorted(missing)}")


def _expect_name(value: Any, at: str) -> str:
    if not isinstance(value, str) or not value:
        raise _fail(at, "expected a non-empty string")
    if "/" in value:
        raise _fail(at, "names must not contain '/'")
    return value


def parse_workflow(doc: Any, at: str = "workflow", depth: int = 1) -> wf.WorkflowDef:
    if depth > wf.MAX_NESTING_DEPTH:
        raise _fail(at, f"nesting deeper than {wf.MAX_NESTING_DEPTH} levels")
    _expect_keys(doc, at, {"activities", "edges"})
    if not isinstance(doc["activities"], list) or not isinstance(doc["edges"], list):
        raise _fail(at, "activities and edges must be arrays")

    activities = []
    for i, adoc in enumerate(doc["activities"]):
        ctx = f"{at}.activities[{i}]"
        _expect_keys(adoc, ctx, {"name", "kind"},
                     {"split", "join", "role", "schemaRef", "consequence", "guards", "nested"})
        name = _expect_name(adoc["name"], f"{ctx}.name")
        kind = adoc["kind"]
        if kind not in ("elementary", "composite"):
            raise _fail(f"{ctx}.kind", f"unknown kind {kind!r}")
        split = adoc.get("split", "sequence")
        if split not in wf.SPLITS:
            raise _fail(f"{ctx}.split", f"unknown split {split!r}")
        join = adoc.get("join", "none")
        if join not in wf.JOINS:
            raise _fail(f"{ctx}.join", f"unknown join {join!r}")

        guards: list[tuple[str, str]] = []
        for j, gdoc in enumerate(adoc.get("guards", [])):
            gctx = f"{ctx}.guards[{j}]"
            _expect_keys(gdoc, gctx, {"guard", "target"})
            guard = gdoc["guard"]
            target = gdoc["target"]
            if not isinstance(guard, str) or not guard:
                raise _fail(f"{gctx}.guard", "expected a script name or 'default'")
            if not isinstance(target, str) or not target:
                raise _fail(f"{gctx}.target", "expected an activity name")
            guards.append((guard, target))

        role = adoc.get("role")
        schema_ref = adoc.get("schemaRef")
        consequence = adoc.get("consequence")
        nested_doc = adoc.get("nested")
        if kind == "elementary":
            if not isinstance(role, str) or not role:
                raise _fail(f"{ctx}.role", "elementary activities need a role")
            if not isinstance(schema_ref, str) or not schema_ref:
                raise _fail(f"{ctx}.schemaRef", "elementary activities need an outcome schema")
            if consequence is not None and (not isinstance(consequence, str) or not consequence):
                raise _fail(f"{ctx}.consequence", "expected a script name")
            if nested_doc is not None:
                raise _fail(f"{ctx}.nested", "only composite activities nest")
            nested = None
        else:
            for key in ("role", "schemaRef", "consequence"):
                if adoc.get(key) is not None:
                    raise _fail(f"{ctx}.{key}", "not allowed on composite activities")
            if nested_doc is None:
                raise _fail(f"{ctx}.nested", "composite activities need a nested workflow")
            nested = parse_workflow(nested_doc, f"{ctx}.nested", depth + 1)

        activities.append(wf.ActivityDef(name=name, kind=kind, split=split, join=join,
                                         role=role, schema_ref=schema_ref,
                                         consequence=consequence, guards=tuple(guards),
                                         nested=nested))

    edges = []
    for i, edoc in enumerate(doc["edges"]):
        ctx = f"{at}.edges[{i}]"
        if (not isinstance(edoc, list) or len(edoc) != 2
                or not all(isinstance(e, str) and e for e in edoc)):
            raise _fail(ctx, "expected a [from, to] pair of names")
        edges.append((edoc[0], edoc[1]))

    return wf.WorkflowDef(activities=tuple(activities), edges=tuple(edges))


def parse_bundle(doc: Any) -> ItemDescription:
    """Parse and cross-check one bundle document.  The returned description
    has version 0; registration assigns the real version."""
    _expect_keys(doc, "bundle", {"name", "workflow"},
                 {"properties", "collections", "schemas", "scripts"})
    name = _expect_name(doc["name"], "bundle.name")

    properties: dict[str, PropertyDef] = {}
    for i, pdoc in enumerate(doc.get("properties", [])):
        ctx = f"bundle.properties[{i}]"
        _expect_keys(pdoc, ctx, {"name", "type", "initial", "mutable"})
        pname = _expect_name(pdoc["name"], f"{ctx}.name")
        if pname in properties:
            raise _fail(ctx, f"property {pname!r} declared twice")
        ptype = pdoc["type"]
        if ptype not in PROPERTY_TYPES:
            raise _fail(f"{ctx}.type", f"unknown property type {ptype!r}")
        if not check_value(ptype, pdoc["initial"]):
            raise _fail(f"{ctx}.initial", f"initial value does not fit type {ptype!r}")
        if type(pdoc["mutable"]) is not bool:
            raise _fail(f"{ctx}.mutable", "expected true or false")
        properties[pname] = PropertyDef(name=pname, type=ptype, initial=pdoc["initial"],
                                        mutable=pdoc["mutable"])

    collections: dict[str, CollectionDef] = {}
    for i, cdoc in enumerate(doc.get("collections", [])):
        ctx = f"bundle.collections[{i}]"
        _expect_keys(cdoc, ctx, {"name", "allowedDescriptions"})
        cname = _expect_name(cdoc["name"], f"{ctx}.name")
        if cname in collections:
            raise _fail(ctx, f"collection {cname!r} declared twice")
        allowed = cdoc["allowedDescriptions"]
        if (not isinstance(allowed, list) or not allowed
                or not all(isinstance(a, str) and a for a in allowed)):
            raise _fail(f"{ctx}.allowedDescriptions",
                        "expected a non-empty array of description names")
        collections[cname] = CollectionDef(name=cname, allowed_descriptions=tuple(allowed))

    schemas: dict[str, Schema] = {}
    sdocs = doc.get("schemas", {})
    if not isinstance(sdocs, dict):
        raise _fail("bundle.schemas", "expected an object of named schemas")
    for sname, sdoc in sdocs.items():
        try:
            schemas[sname] = parse_schema(sdoc)
        except EngineError as err:
            if err.code != SCHEMA_PARSE:
                raise
            raise _fail(f"bundle.schemas.{sname}", err.message)

    scripts: dict[str, str] = {}
    script_docs = doc.get("scripts", {})
    if not isinstance(script_docs, dict):
        raise _fail("bundle.scripts", "expected an object of named scripts")
    for scr_name, source in script_docs.items():
        if not isinstance(source, str):
            raise _fail(f"bundle.scripts.{scr_name}", "expected script source text")
        scripts[scr_name] = source

    workflow = parse_workflow(doc["workflow"])
    flat = wf.flatten(workflow)

    missing: list[dict] = []
    guard_refs: set[str] = set()
    consequence_refs: set[str] = set()
    for level in flat.levels.values():
        for local, act in level.activities.items():
            qn = level.prefix + local
            if act.kind == "elementary" and act.schema_ref not in schemas:
                missing.append({"activity": qn, "kind": "schema", "ref": act.schema_ref})
            if act.consequence is not None:
                if act.consequence in scripts:
                    consequence_refs.add(act.consequence)
                else:
                    missing.append({"activity": qn, "kind": "script", "ref": act.consequence})
            for guard, _target in act.guards:
                if guard == "default":
                    continue
                if guard in scripts:
                    guard_refs.add(guard)
                else:
                    missing.append({"activity": qn, "kind": "script", "ref": guard})
    if missing:
        first = missing[0]
        raise EngineError(DANGLING_REF,
                          f"{first['activity']} references unknown {first['kind']} "
                          f"{first['ref']!r}", detail={"missing": missing})

    guard_scripts: dict[str, Script] = {}
    consequence_scripts: dict[str, Script] = {}
    for ref in sorted(guard_refs):
        try:
            guard_scripts[ref] = parse_script(scripts[ref], "guard")
        except EngineError as err:
            if err.code != SYNTAX:
                raise
            raise _fail(f"bundle.scripts.{ref}", f"guard does not parse: {err.message}")
    for ref in sorted(consequence_refs):
        try:
            consequence_scripts[ref] = parse_script(scripts[ref], "consequence")
        except EngineError as err:
            if err.code != SYNTAX:
                raise
            raise _fail(f"bundle.scripts.{ref}", f"consequence does not parse: {err.message}")

    return ItemDescription(name=name, version=0, bundle_doc=doc, properties=properties,
                           collections=collections, schemas=schemas, scripts=scripts,
                           guard_scripts=guard_scripts,
                           consequence_scripts=consequence_scripts,
                           workflow=workflow, flat=flat)


# -- items and the fold ---------------------------------------------------

@dataclass
class Item:
    id: str
    name: str
    description_name: str
    description_version: int
    kind: str                                  # "item" | "description"
    properties: dict[str, Any] = field(default_factory=dict)
    collections: dict[str, list[str]] = field(default_factory=dict)
    marking: wf.Marking = field(default_factory=wf.Marking)
    finished: bool = False
    last_event_seq: int = 0
    versions: dict[int, dict] = field(default_factory=dict)

    def copy(self) -> "Item":
        return Item(id=self.id, name=self.name, description_name=self.description_name,
                    description_version=self.description_version, kind=self.kind,
                    properties=dict(self.properties),
                    collections={k: list(v) for k, v in self.collections.items()},
                    marking=self.marking.copy(), finished=self.finished,
                    last_event_seq=self.last_event_seq,
                    versions=dict(self.versions))

    def to_doc(self) -> dict:
        doc = {"id": self.id, "name": self.name, "descriptionName": self.description_name,
               "descriptionVersion": self.description_version, "kind": self.kind,
               "properties": dict(self.properties),
               "collections": {k: list(v) for k, v in self.collections.items()},
               "marking": self.marking.to_doc(), "finished": self.finished,
               "lastEventSeq": self.last_event_seq}
        if self.kind == "description":
            doc["versions"] = {str(v): bundle for v, bundle in sorted(self.versions.items())}
        return doc

    @staticmethod
    def from_doc(doc: dict) -> "Item":
        return Item(id=doc["id"], name=doc["name"],
                    description_name=doc["descriptionName"],
                    description_version=doc["descriptionVersion"], kind=doc["kind"],
                    properties=dict(doc["properties"]),
                    collections={k: list(v) for k, v in doc["collections"].items()},
                    marking=wf.Marking.from_doc(doc["marking"]), finished=doc["finished"],
                    last_event_seq=doc["lastEventSeq"],
                    versions={int(v): b for v, b in doc.get("versions", {}).items()})

    def summary_doc(self) -> dict:
        return {"id": self.id, "name": self.name, "descriptionName": self.description_name,
                "descriptionVersion": self.description_version, "kind": self.kind,
                "finished": self.finished, "lastEventSeq": self.last_event_seq}


def _illegal(event: pv.Event, reason: str) -> EngineError:
    return EngineError(FOLD_ILLEGAL, f"event {event.seq} ({event.what}): {reason}",
                       detail={"seq": event.seq, "what": event.what})


def apply_event(item: Item | None, event: pv.Event, resolver: Resolver) -> Item:
    """The single state-transition function.  Live execution and replay both
    go through here, so a divergence between them cannot exist."""
    if event.what == pv.ITEM_CREATED:
        if item is not None:
            raise _illegal(event, "item already exists")
        if event.seq != 1:
            raise EngineError(FOLD_GAP, f"first event has seq {event.seq}",
                              detail={"seq": event.seq})
        p = event.payload
        if p["kind"] == "description":
            return Item(id=event.item_id, name=p["name"],
                        description_name=DESCRIPTION_REGISTRY, description_version=0,
                        kind="description", last_event_seq=1)
        desc = resolver(p["description"], p["version"])
        marking = wf.initial_marking(desc.flat)
        return Item(id=event.item_id, name=p["name"], description_name=p["description"],
                    description_version=p["version"], kind="item",
                    properties=dict(p["properties"]),
                    collections={c: [] for c in desc.collections},
                    marking=marking, finished=marking.is_final(), last_event_seq=1)

    if item is None:
        raise EngineError(FOLD_GAP, "log does not begin with ItemCreated",
                          detail={"seq": event.seq})
    if event.seq != item.last_event_seq + 1:
        raise EngineError(FOLD_GAP,
                          f"event seq {event.seq} after {item.last_event_seq}",
                          detail={"seq": event.seq, "expected": item.last_event_seq + 1})

    if event.what == pv.VERSION_CREATED:
        if item.kind != "description":
            raise _illegal(event, "only description items grow versions")
        item.versions[event.payload["version"]] = event.payload["bundle"]

    elif event.what == pv.OUTCOME_RECORDED:
        pass  # facts for provenance; no state transition

    elif event.what == pv.PROPERTY_SET:
        item.properties[event.payload["name"]] = event.payload["value"]

    elif event.what == pv.COLLECTION_CHANGED:
        p = event.payload
        members = item.collections.get(p["collection"])
        if members is None:
            raise _illegal(event, f"unknown collection {p['collection']!r}")
        if p["op"] == "add":
            if p["member"] in members:
                raise _illegal(event, "member already present")
            members.append(p["member"])
        elif p["op"] == "remove":
            if p["member"] not in members:
                raise _illegal(event, "member not present")
            members.remove(p["member"])
        else:
            raise _illegal(event, f"unknown op {p['op']!r}")

    elif event.what == pv.JOB_EXECUTED:
        desc = resolver(item.description_name, item.description_version)
        qn = event.payload["activity"]
        if not item.marking.tokens.get(qn):
            raise _illegal(event, f"no token on {qn!r}")
        queue = [list(d) for d in event.payload["decisions"]]

        def chooser(at: str, _act: wf.ActivityDef, targets: list[str]) -> str:
            if not queue:
                raise _illegal(event, f"no recorded decision for split at {at!r}")
            rec_at, rec_target = queue.pop(0)
            if rec_at != at or rec_target not in targets:
                raise _illegal(event, f"recorded decision {rec_at}->{rec_target} "
                                      f"does not match split at {at!r}")
            return rec_target

        item.marking, _ = wf.advance(desc.flat, item.marking, qn, chooser)
        if queue:
            raise _illegal(event, "unused recorded decisions")
        item.finished = item.marking.is_final()

    elif event.what == pv.MIGRATION_APPLIED:
        plan = MigrationPlan.from_doc(event.payload)
        if plan.from_version != item.description_version:
            raise _illegal(event, f"plan expects version {plan.from_version}, "
                                  f"item is at {item.description_version}")
        target = resolver(item.description_name, plan.to_version)
        item.marking = rewrite_marking(item.marking, plan, target.flat)
        item.description_version = plan.to_version
        item.finished = item.marking.is_final()

    else:
        raise _illegal(event, "unknown event type")

    item.last_event_seq = event.seq
    return item


def fold_events(events: list[pv.Event], resolver: Resolver) -> Item:
    if not events:
        raise EngineError(FOLD_GAP, "empty event log")
    item: Item | None = None
    for event in events:
        item = apply_event(item, event, resolver)
    assert item is not None
    return item
