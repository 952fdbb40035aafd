"""The operations layer: registration, instantiation, job execution,
effects, and migration, all funneled into durably appended events.

The engine owns concurrency (a lock per item plus one for the registry)
and the commit discipline: every operation first validates completely,
then appends its whole event batch with one fsync, then folds those same
events onto the cached state.  Nothing mutates an item except the fold,
so live state and replayed state cannot diverge.
"""

from __future__ import annotations

import hashlib
import threading
from typing import Any

from . import provenance as pv
from . import workflow as wf
from .canonical import dumps
from .errors import (EngineError, DUPLICATE_MEMBER, GRAPH_INVALID, IMMUTABLE_PROPERTY,
                     MEMBER_TYPE_FORBIDDEN, OUTCOME_INVALID, PARSE_ERROR,
                     PROPERTY_TYPE_MISMATCH, ROLE_DENIED, SCRIPT_ERROR, STALE_PLAN,
                     UNDECLARED_PROPERTY, UNKNOWN_DESCRIPTION, UNKNOWN_ITEM,
                     UNKNOWN_JOB, UNKNOWN_TARGET, UNKNOWN_VERSION)
from .identity import IdGenerator, SystemClock
from .migration import MigrationPlan, check_migration, verify_plan
from .model import (DESCRIPTION_REGISTRY, Item, ItemDescription, check_value,
                    apply_event, fold_events, parse_bundle)
from .schema import validate_outcome
from .scripting import (AddMember, EvalContext, RemoveMember, SetProperty,
                        eval_guard, exec_consequence)
from .store import Agent, Store


def description_item_id(name: str) -> str:
    """Descriptions are items too; their ids derive from the name so the
    same description maps to the same item everywhere."""
    return hashlib.sha256(f"description:{name}".encode("utf-8")).hexdigest()[:32]


class Engine:
    def __init__(self, store: Store, clock=None, ids: IdGenerator | None = None):
        self.store = store
        self.clock = clock or SystemClock()
        self.ids = ids or IdGenerator()
        self._items: dict[str, Item] = {}
        self._descs: dict[tuple[str, int], ItemDescription] = {}
        self._locks: dict[str, threading.Lock] = {}
        self._master = threading.Lock()
        self._registry_lock = threading.Lock()

    # -- descriptions --

    def resolver(self, name: str, version: int) -> ItemDescription:
        with self._master:
            cached = self._descs.get((name, version))
        if cached is not None:
            return cached
        versions = self.store.description_versions(name)
        if not versions:
            raise EngineError(UNKNOWN_DESCRIPTION, f"no description named {name!r}")
        if version not in versions:
            raise EngineError(UNKNOWN_VERSION, f"{name} has no version {version}",
                              detail={"known": versions})
        desc = parse_bundle(self.store.description_doc(name, version))
        desc.version = version
        with self._master:
            self._descs[(name, version)] = desc
        return desc

    def register_description(self, bundle_doc: Any, agent_id: str, why: str | None = None,
                             state_bound: int = wf.DEFAULT_STATE_BOUND) -> tuple[ItemDescription, wf.SoundnessReport]:
        desc = parse_bundle(bundle_doc)
        report = wf.validate_graph(desc.workflow)
        if not report.valid:
            raise EngineError(GRAPH_INVALID, "workflow graph is invalid",
                              detail=report.to_doc())
        soundness = wf.check_soundness(desc.workflow, state_bound)
        if not soundness.sound:
            raise EngineError(GRAPH_INVALID, "workflow cannot always run to completion",
                              detail={"soundness": soundness.to_doc()})

        with self._registry_lock:
            item_id = description_item_id(desc.name)
            known = set(self.store.description_versions(desc.name))
            if self.store.has_item(item_id):
                known |= set(self.get_item(item_id).versions)
            version = max(known, default=0) + 1
            desc.version = version

            events = []
            seq = self.store.last_seq(item_id)
            base: Item | None = None
            if seq == 0:
                events.append(self._event(item_id, 1, pv.ITEM_CREATED, agent_id,
                                          how="register",
                                          which=f"{DESCRIPTION_REGISTRY}/0",
                                          payload={"name": desc.name,
                                                   "description": DESCRIPTION_REGISTRY,
                                                   "version": 0, "properties": {},
                                                   "kind": "description"},
                                          why=why))
                seq = 1
            else:
                base = self.get_item(item_id)
            events.append(self._event(item_id, seq + 1, pv.VERSION_CREATED, agent_id,
                                      how="publish", which=f"{desc.name}/{version}",
                                      payload={"name": desc.name, "version": version,
                                               "bundle": bundle_doc},
                                      why=why))
            with self._lock_for(item_id):
                self._commit(item_id, base, events)
            self.store.put_description(desc.name, version, bundle_doc)
            with self._master:
                self._descs[(desc.name, version)] = desc
        return desc, soundness

    # -- items --

    def get_item(self, item_id: str) -> Item:
        with self._master:
            cached = self._items.get(item_id)
        if cached is not None:
            return cached
        with self._lock_for(item_id):
            with self._master:
                cached = self._items.get(item_id)
            if cached is not None:
                return cached
            if not self.store.has_item(item_id):
                raise EngineError(UNKNOWN_ITEM, f"no item {item_id!r}")
            snap = self.store.read_snapshot(item_id)
            if snap is not None and snap.get("lastEventSeq") == self.store.last_seq(item_id):
                item = Item.from_doc(snap)
            else:
                item = fold_events(self.store.read_events(item_id), self.resolver)
            with self._master:
                self._items[item_id] = item
            return item

    def list_items(self, limit: int = 500) -> list[dict]:
        summaries = []
        for item_id in self.store.item_ids():
            if len(summaries) >= limit:
                break
            summaries.append(self.get_item(item_id).summary_doc())
        return summaries

    def instantiate_item(self, name: str, version: int, item_name: str,
                         overrides: dict[str, Any] | None = None,
                         agent_id: str = "", why: str | None = None) -> Item:
        desc = self.resolver(name, version)
        if not isinstance(item_name, str) or not item_name:
            raise EngineError(PARSE_ERROR, "items need a non-empty name")
        props = desc.initial_properties()
        for key, value in (overrides or {}).items():
            pdef = desc.properties.get(key)
            if pdef is None:
                raise EngineError(UNDECLARED_PROPERTY, f"no property {key!r} declared",
                                  detail={"property": key})
            if not check_value(pdef.type, value):
                raise EngineError(PROPERTY_TYPE_MISMATCH,
                                  f"property {key!r} wants {pdef.type}",
                                  detail={"property": key, "type": pdef.type})
            props[key] = value

        item_id = self.ids.new_id()
        while self.store.has_item(item_id):
            item_id = self.ids.new_id()
        event = self._event(item_id, 1, pv.ITEM_CREATED, agent_id, how="instantiate",
                            which=f"{name}/{version}",
                            payload={"name": item_name, "description": name,
                                     "version": version, "properties": props,
                                     "kind": "item"},
                            why=why)
        with self._lock_for(item_id):
            return self._commit(item_id, None, [event])

    # -- jobs --

    def list_jobs(self, item_id: str, agent_id: str) -> list[wf.Job]:
        item = self.get_item(item_id)
        if item.kind != "item" or item.finished:
            return []
        desc = self.resolver(item.description_name, item.description_version)
        roles = self._roles(agent_id)
        return [job for job in wf.jobs_for_marking(desc.flat, item_id, item.marking)
                if job.required_role in roles]

    def execute_job(self, item_id: str, job_id: str, outcome: Any, agent_id: str,
                    why: str | None = None) -> Item:
        with self._lock_for(item_id):
            item = self._get_locked(item_id)
            if item.kind != "item":
                raise EngineError(UNKNOWN_JOB, "descriptions have no jobs")
            desc = self.resolver(item.description_name, item.description_version)
            jobs = wf.jobs_for_marking(desc.flat, item_id, item.marking)
            job = next((j for j in jobs if j.job_id == job_id), None)
            if job is None:
                raise EngineError(UNKNOWN_JOB, f"no current job {job_id!r}",
                                  detail={"jobId": job_id})
            if job.required_role not in self._roles(agent_id):
                raise EngineError(ROLE_DENIED,
                                  f"agent {agent_id!r} lacks role {job.required_role!r}",
                                  detail={"requiredRole": job.required_role})
            report = validate_outcome(desc.schemas[job.schema_ref], outcome)
            if not report.valid:
                raise EngineError(OUTCOME_INVALID, "outcome does not match its schema",
                                  detail=report.to_doc())

            act = desc.flat.elementary[job.activity]
            effects = []
            if act.consequence:
                ctx = EvalContext(outcome=outcome, item_properties=item.properties,
                                  activity_name=job.activity)
                effects = exec_consequence(desc.consequence_scripts[act.consequence], ctx)

            working = item.copy()
            staged = self._stage_effects(working, desc, effects,
                                         activity=job.activity, script=act.consequence)

            def chooser(qn: str, split_act: wf.ActivityDef, targets: list[str]) -> str:
                ctx2 = EvalContext(outcome=outcome, item_properties=working.properties,
                                   activity_name=qn)
                for guard_name, target in split_act.guards:
                    if guard_name == "default":
                        return target
                    if eval_guard(desc.guard_scripts[guard_name], ctx2):
                        return target
                raise EngineError(SCRIPT_ERROR,
                                  f"no guard accepted at {qn} and there is no default",
                                  detail={"activity": qn})

            _, decisions = wf.advance(desc.flat, item.marking, job.activity, chooser)

            which = f"{item.description_name}/{item.description_version}"
            seq = item.last_event_seq
            events = [self._event(item_id, seq + 1, pv.OUTCOME_RECORDED, agent_id,
                                  how=f"record:{job.activity}",
                                  which=f"{which}/schema:{job.schema_ref}",
                                  payload={"activity": job.activity,
                                           "schema": job.schema_ref, "outcome": outcome},
                                  why=why)]
            for what, payload, how in staged:
                events.append(self._event(item_id, seq + 1 + len(events), what, agent_id,
                                          how=how,
                                          which=f"{which}/script:{act.consequence}",
                                          payload=payload, why=why))
            events.append(self._event(item_id, seq + 1 + len(events), pv.JOB_EXECUTED,
                                      agent_id, how=f"execute:{job.activity}", which=which,
                                      payload={"activity": job.activity, "jobId": job_id,
                                               "decisions": decisions},
                                      why=why))
            return self._commit(item_id, item, events)

    # -- direct effects --

    def apply_effects(self, item_id: str, effects: list, agent_id: str,
                      why: str | None = None) -> Item:
        with self._lock_for(item_id):
            item = self._get_locked(item_id)
            if item.kind != "item":
                raise EngineError(UNKNOWN_TARGET, "descriptions carry no properties")
            desc = self.resolver(item.description_name, item.description_version)
            working = item.copy()
            staged = self._stage_effects(working, desc, effects, activity=None, script=None)
            which = f"{item.description_name}/{item.description_version}"
            seq = item.last_event_seq
            events = [self._event(item_id, seq + 1 + i, what, agent_id, how=how,
                                  which=which, payload=payload, why=why)
                      for i, (what, payload, how) in enumerate(staged)]
            if not events:
                return item
            return self._commit(item_id, item, events)

    def _stage_effects(self, working: Item, desc: ItemDescription, effects: list,
                       activity: str | None, script: str | None) -> list[tuple]:
        """Validate effects in order against a working copy; any failure
        aborts the whole batch before anything is written."""
        staged: list[tuple] = []
        for eff in effects:
            if isinstance(eff, SetProperty):
                pdef = desc.properties.get(eff.name)
                if pdef is None:
                    raise EngineError(UNKNOWN_TARGET, f"no property {eff.name!r}",
                                      detail={"property": eff.name})
                if not pdef.mutable:
                    raise EngineError(IMMUTABLE_PROPERTY,
                                      f"property {eff.name!r} is immutable",
                                      detail={"property": eff.name})
                if not check_value(pdef.type, eff.value):
                    raise EngineError(PROPERTY_TYPE_MISMATCH,
                                      f"property {eff.name!r} wants {pdef.type}",
                                      detail={"property": eff.name, "type": pdef.type})
                working.properties[eff.name] = eff.value
                staged.append((pv.PROPERTY_SET,
                               {"name": eff.name, "value": eff.value,
                                "activity": activity, "script": script},
                               f"set:{eff.name}"))
            elif isinstance(eff, (AddMember, RemoveMember)):
                cdef = desc.collections.get(eff.collection)
                if cdef is None:
                    raise EngineError(UNKNOWN_TARGET, f"no collection {eff.collection!r}",
                                      detail={"collection": eff.collection})
                members = working.collections.setdefault(eff.collection, [])
                if isinstance(eff, AddMember):
                    entry = self.store.item_entry(eff.member)
                    member_desc = entry.get("description", "")
                    if member_desc not in cdef.allowed_descriptions:
                        raise EngineError(MEMBER_TYPE_FORBIDDEN,
                                          f"collection {eff.collection!r} does not allow "
                                          f"items of {member_desc!r}",
                                          detail={"collection": eff.collection,
                                                  "memberDescription": member_desc})
                    if eff.member in members:
                        raise EngineError(DUPLICATE_MEMBER,
                                          f"{eff.member!r} already in {eff.collection!r}",
                                          detail={"collection": eff.collection,
                                                  "member": eff.member})
                    members.append(eff.member)
                    op = "add"
                else:
                    if eff.member not in members:
                        raise EngineError(UNKNOWN_TARGET,
                                          f"{eff.member!r} not in {eff.collection!r}",
                                          detail={"collection": eff.collection,
                                                  "member": eff.member})
                    members.remove(eff.member)
                    op = "remove"
                staged.append((pv.COLLECTION_CHANGED,
                               {"collection": eff.collection, "op": op,
                                "member": eff.member, "activity": activity,
                                "script": script},
                               f"{op}:{eff.collection}"))
            else:
                raise EngineError(SCRIPT_ERROR, f"unknown effect {eff!r}")
        return staged

    # -- migration --

    def migrate_check(self, item_id: str, to_version: int,
                      remap: dict[str, str] | None = None,
                      state_bound: int = wf.DEFAULT_STATE_BOUND) -> MigrationPlan:
        item = self.get_item(item_id)
        source = self.resolver(item.description_name, item.description_version)
        target = self.resolver(item.description_name, to_version)
        return check_migration(item_id, item.marking, source.flat, target.flat,
                               item.description_version, to_version, remap, state_bound)

    def migrate_apply(self, item_id: str, plan_doc: dict, agent_id: str,
                      why: str | None = None,
                      state_bound: int = wf.DEFAULT_STATE_BOUND) -> Item:
        required = {"itemId", "fromVersion", "toVersion", "tokenMap", "joinWaitMap", "notes"}
        if not isinstance(plan_doc, dict) or set(plan_doc) != required:
            raise EngineError(PARSE_ERROR, "plan document has wrong keys")
        with self._lock_for(item_id):
            item = self._get_locked(item_id)
            if plan_doc["itemId"] != item_id:
                raise EngineError(STALE_PLAN, "plan names a different item")
            if plan_doc["fromVersion"] != item.description_version:
                raise EngineError(STALE_PLAN,
                                  f"plan starts from version {plan_doc['fromVersion']} "
                                  f"but item is at {item.description_version}")
            source = self.resolver(item.description_name, item.description_version)
            target = self.resolver(item.description_name, plan_doc["toVersion"])
            remap = {**plan_doc["tokenMap"], **plan_doc["joinWaitMap"]}
            fresh = check_migration(item_id, item.marking, source.flat, target.flat,
                                    item.description_version, plan_doc["toVersion"],
                                    remap, state_bound)
            verify_plan(plan_doc, fresh)
            event = self._event(item_id, item.last_event_seq + 1, pv.MIGRATION_APPLIED,
                                agent_id,
                                how=f"migrate:{plan_doc['fromVersion']}->"
                                    f"{plan_doc['toVersion']}",
                                which=f"{item.description_name}/{plan_doc['toVersion']}",
                                payload=plan_doc, why=why)
            return self._commit(item_id, item, [event])

    # -- provenance and verification --

    def events_for(self, item_id: str, what: str | None = None, who: str | None = None,
                   time_from: str | None = None, time_to: str | None = None,
                   limit: int = 500) -> list[pv.Event]:
        self.get_item(item_id)  # UNKNOWN_ITEM check
        events = pv.query_events(self.store.read_events(item_id), what=what, who=who,
                                 time_from=time_from, time_to=time_to)
        return events[:limit]

    def prov_for(self, item_id: str) -> dict:
        self.get_item(item_id)
        return pv.export_prov(item_id, self.store.read_events(item_id))

    def verify_store(self) -> dict:
        """Replay every item from its log alone and reconcile snapshots.
        A snapshot that disagrees with its replay counts as a mismatch and
        is rewritten from the replay."""
        replayed = 0
        mismatches: list[dict] = []
        for item_id in self.store.item_ids():
            try:
                events = self.store.read_events(item_id)
                for ev in events:
                    pv.validate_event(ev)
                item = fold_events(events, self.resolver)
            except EngineError as err:
                mismatches.append({"itemId": item_id, "reason": err.code})
                continue
            replayed += 1
            doc = item.to_doc()
            snap = self.store.read_snapshot(item_id)
            same = snap is not None and dumps(snap) == dumps(doc)
            if snap is not None and not same:
                mismatches.append({"itemId": item_id, "reason": "snapshot drift"})
            if not same:
                self.store.write_snapshot(item_id, doc)
            with self._master:
                self._items[item_id] = item
        return {"items": replayed, "mismatches": mismatches}

    # -- agents --

    def register_agent(self, agent_id: str, display_name: str, roles: list[str]) -> Agent:
        agent = Agent(id=agent_id, display_name=display_name, roles=tuple(roles))
        self.store.agents[agent_id] = agent
        self.store.save_agents()
        return agent

    def list_agents(self) -> list[dict]:
        return [self.store.agents[aid].to_doc() for aid in sorted(self.store.agents)]

    # -- plumbing --

    def _roles(self, agent_id: str) -> tuple[str, ...]:
        agent = self.store.agents.get(agent_id)
        return agent.roles if agent else ()

    def _lock_for(self, item_id: str) -> threading.Lock:
        with self._master:
            lock = self._locks.get(item_id)
            if lock is None:
                lock = self._locks[item_id] = threading.Lock()
            return lock

    def _get_locked(self, item_id: str) -> Item:
        """get_item for callers already holding the item's lock."""
        with self._master:
            cached = self._items.get(item_id)
        if cached is not None:
            return cached
        if not self.store.has_item(item_id):
            raise EngineError(UNKNOWN_ITEM, f"no item {item_id!r}")
        snap = self.store.read_snapshot(item_id)
        if snap is not None and snap.get("lastEventSeq") == self.store.last_seq(item_id):
            item = Item.from_doc(snap)
        else:
            item = fold_events(self.store.read_events(item_id), self.resolver)
        with self._master:
            self._items[item_id] = item
        return item

    def _event(self, item_id: str, seq: int, what: str, who: str, how: str, which: str,
               payload: dict, why: str | None = None) -> pv.Event:
        event = pv.Event(item_id=item_id, seq=seq, what=what, when=self.clock.now(),
                         who=who, how=how, where=self.store.node_name, which=which,
                         payload=payload, why=why)
        pv.validate_event(event)
        return event

    def _commit(self, item_id: str, base: Item | None, events: list[pv.Event]) -> Item:
        self.store.append_events(item_id, events)
        item = base.copy() if base is not None else None
        for event in events:
            item = apply_event(item, event, self.resolver)
        assert item is not None
        with self._master:
            self._items[item_id] = item
        self.store.write_snapshot(item_id, item.to_doc())
        return item
