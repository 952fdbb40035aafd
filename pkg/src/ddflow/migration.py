"""Moving a live item from one description version to another.

A migration is planned first and applied second.  Planning maps every
token and pending join of the current marking onto the new flattened
graph (identity by default, overridable by an explicit remap), then
explores the whole marking graph from the mapped marking: clean
completion must stay reachable from everywhere reachable.  The resulting
plan is a document; applying re-plans against the current state and
rejects on any difference, so a plan can never act on state it did not
see.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from . import workflow as wf
from .canonical import dumps
from .errors import (BAD_REMAP, EngineError, MIGRATION_ORPHAN, MIGRATION_UNSOUND,
                     PARSE_ERROR, STALE_PLAN)


@dataclass
class MigrationPlan:
    item_id: str
    from_version: int
    to_version: int
    token_map: dict[str, str] = field(default_factory=dict)
    join_wait_map: dict[str, str] = field(default_factory=dict)
    notes: list[str] = field(default_factory=list)

    def to_doc(self) -> dict:
        return {"itemId": self.item_id, "fromVersion": self.from_version,
                "toVersion": self.to_version, "tokenMap": dict(sorted(self.token_map.items())),
                "joinWaitMap": dict(sorted(self.join_wait_map.items())),
                "notes": list(self.notes)}

    @staticmethod
    def from_doc(doc: dict) -> "MigrationPlan":
        return MigrationPlan(item_id=doc["itemId"], from_version=doc["fromVersion"],
                             to_version=doc["toVersion"], token_map=dict(doc["tokenMap"]),
                             join_wait_map=dict(doc["joinWaitMap"]), notes=list(doc["notes"]))


def diff_versions(old_flat: wf.FlatGraph, new_flat: wf.FlatGraph) -> dict:
    """Classify qualified activity names across two flattened graphs.
    An activity counts as changed when any attribute or its local edge
    context differs."""
    old_names = _all_names(old_flat)
    new_names = _all_names(new_flat)
    added = sorted(new_names - old_names)
    removed = sorted(old_names - new_names)
    changed = []
    unchanged = []
    for qn in sorted(old_names & new_names):
        if _signature(old_flat, qn) == _signature(new_flat, qn):
            unchanged.append(qn)
        else:
            changed.append(qn)
    return {"added": added, "removed": removed, "changed": changed, "unchanged": unchanged}


def _all_names(flat: wf.FlatGraph) -> set[str]:
    names = set()
    for level in flat.levels.values():
        for local in level.activities:
            names.add(level.prefix + local)
    return names


def _signature(flat: wf.FlatGraph, qn: str) -> tuple:
    level, local = flat.split_qname(qn)
    act = level.activities[local]
    return (act.kind, act.split, act.join, act.role, act.schema_ref, act.consequence,
            act.guards, tuple(sorted(level.out_edges.get(local, []))),
            tuple(sorted(level.in_edges.get(local, []))))


def check_migration(item_id: str, marking: wf.Marking, old_flat: wf.FlatGraph,
                    new_flat: wf.FlatGraph, from_version: int, to_version: int,
                    remap: dict[str, str] | None = None,
                    state_bound: int = wf.DEFAULT_STATE_BOUND) -> MigrationPlan:
    """Produce a validated plan or raise.

    Tokens map by name unless remapped; a token whose activity has no image
    in the new graph is an orphan.  The mapped marking seeds a full
    exploration of the new graph before the plan is accepted.
    """
    if to_version <= from_version:
        raise EngineError(PARSE_ERROR, "migration must target a newer version")
    remap = dict(remap or {})
    old_names = _all_names(old_flat) | {wf.END}
    new_names = _all_names(new_flat) | {wf.END}
    for key, value in remap.items():
        if key not in old_names:
            raise EngineError(BAD_REMAP, f"remap key {key!r} is not in the current graph",
                              detail={"key": key})
        if value not in new_names:
            raise EngineError(BAD_REMAP, f"remap value {value!r} is not in the target graph",
                              detail={"key": key, "value": value})

    notes: list[str] = []
    token_map: dict[str, str] = {}
    for qn in sorted(marking.tokens):
        target = remap.get(qn, qn)
        if qn in remap:
            if target != wf.END and target not in new_flat.elementary:
                raise EngineError(BAD_REMAP,
                                  f"token on {qn!r} remapped to {target!r}, "
                                  "which cannot hold a token",
                                  detail={"key": qn, "value": target})
        elif target != wf.END and target not in new_flat.elementary:
            raise EngineError(MIGRATION_ORPHAN,
                              f"token on {qn!r} has no image in the target graph",
                              detail={"activity": qn})
        token_map[qn] = target
        if target != wf.END:
            _note_changes(notes, old_flat, new_flat, qn, target)

    join_wait_map: dict[str, str] = {}
    for qn in sorted(marking.join_wait):
        target = remap.get(qn, qn)
        ok = target in new_names and target != wf.END and _is_and_join(new_flat, target)
        if not ok:
            code = BAD_REMAP if qn in remap else MIGRATION_ORPHAN
            raise EngineError(code,
                              f"pending join {qn!r} maps to {target!r}, "
                              "which is not an and-join in the target graph",
                              detail={"join": qn, "value": target})
        join_wait_map[qn] = target

    # Satisfied sources follow the same name maps the plan records, so the
    # replayed rewrite sees exactly what was checked here.
    combined = {**token_map, **join_wait_map}
    for qn in sorted(marking.join_wait):
        target = join_wait_map[qn]
        level, local = new_flat.split_qname(target)
        allowed = new_flat.join_in_edges(level, local)
        for src in sorted(marking.join_wait[qn]):
            if combined.get(src, src) not in allowed:
                notes.append(f"join {target}: satisfied source {src} has no "
                             "counterpart and is dropped")

    plan = MigrationPlan(item_id=item_id, from_version=from_version, to_version=to_version,
                         token_map=token_map, join_wait_map=join_wait_map, notes=sorted(notes))
    mapped = rewrite_marking(marking, plan, new_flat)
    report = wf.explore(new_flat, mapped, state_bound)
    if not report.sound:
        raise EngineError(MIGRATION_UNSOUND,
                          "migrated marking cannot always reach clean completion",
                          detail={"report": report.to_doc()})
    return plan


def _is_and_join(flat: wf.FlatGraph, qn: str) -> bool:
    act = flat.activity(qn)
    return act is not None and act.join == "and"


def _note_changes(notes: list[str], old_flat: wf.FlatGraph, new_flat: wf.FlatGraph,
                  old_qn: str, new_qn: str) -> None:
    old_act = old_flat.elementary.get(old_qn)
    new_act = new_flat.elementary.get(new_qn)
    if old_act is None or new_act is None:
        return
    if old_act.schema_ref != new_act.schema_ref:
        notes.append(f"token at {old_qn} -> {new_qn}: outcome schema changes "
                     f"from {old_act.schema_ref} to {new_act.schema_ref}")
    if old_act.role != new_act.role:
        notes.append(f"token at {old_qn} -> {new_qn}: required role changes "
                     f"from {old_act.role} to {new_act.role}")


def rewrite_marking(marking: wf.Marking, plan: MigrationPlan,
                    new_flat: wf.FlatGraph) -> wf.Marking:
    """Deterministic marking surgery used both when applying and when
    replaying a MigrationApplied event.  A join whose satisfied set becomes
    complete under the mapping fires immediately."""
    new = wf.Marking(next_gen=marking.next_gen)
    for old_qn in sorted(marking.tokens):
        target = plan.token_map[old_qn]
        for _ in marking.tokens[old_qn]:
            new.place(target)
    combined = {**plan.token_map, **plan.join_wait_map}
    gathered: dict[str, set[str]] = {}
    for old_join in sorted(marking.join_wait):
        target = plan.join_wait_map[old_join]
        level, local = new_flat.split_qname(target)
        allowed = new_flat.join_in_edges(level, local)
        kept = {combined.get(s, s) for s in marking.join_wait[old_join]} & allowed
        if kept:
            gathered.setdefault(target, set()).update(kept)
    for target in sorted(gathered):
        level, local = new_flat.split_qname(target)
        if gathered[target] == new_flat.join_in_edges(level, local):
            wf._enter(new_flat, new, level, local, _forbid_choice, [])
        else:
            new.join_wait[target] = gathered[target]
    return new


def _forbid_choice(qn: str, act: wf.ActivityDef, targets: list[str]) -> str:
    raise EngineError(MIGRATION_UNSOUND,
                      f"migration would complete a join whose continuation must "
                      f"choose a branch at {qn}", detail={"activity": qn})


def verify_plan(plan_doc: dict, fresh: MigrationPlan) -> None:
    """Applied plans must byte-match a re-check against current state."""
    if dumps(plan_doc) != dumps(fresh.to_doc()):
        raise EngineError(STALE_PLAN, "plan no longer matches current item state",
                          detail={"expected": fresh.to_doc()})
