"""Activity graphs and their execution semantics.

A workflow is a directed graph of activities between the reserved pseudo
nodes Start and End.  Composite activities nest a whole sub-workflow;
execution state is a marking: a multiset of tokens resting on elementary
activities (qualified with `/` through composites), plus bookkeeping for
partially satisfied and-joins.

Three layers live here:

* structural validation (`validate_graph`) reports violations as data;
* the token semantics (`initial_marking`, `advance`) shared by live
  execution and event replay, parameterized over a chooser that resolves
  xor splits;
* exhaustive marking exploration (`check_soundness`, `explore`), which
  treats xor splits as free choice and decides whether clean completion
  stays reachable from every reachable marking.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

from .errors import BOUND_EXCEEDED, SCRIPT_ERROR, EngineError

START = "Start"
END = "End"

SPLITS = ("sequence", "and", "xor")
JOINS = ("none", "and", "xor")

DEFAULT_STATE_BOUND = 100_000
MAX_NESTING_DEPTH = 8

# validate_graph violation codes
NO_START = "NO_START"
NO_END = "NO_END"
UNREACHABLE = "UNREACHABLE"
DEADEND = "DEADEND"
ARITY = "ARITY"
GUARD_MISSING = "GUARD_MISSING"
DUPLICATE_NAME = "DUPLICATE_NAME"
BAD_EDGE = "BAD_EDGE"


@dataclass(frozen=True)
class ActivityDef:
    name: str
    kind: str                                   # "elementary" | "composite"
    split: str = "sequence"
    join: str = "none"
    role: str | None = None                     # elementary only
    schema_ref: str | None = None               # elementary only
    consequence: str | None = None              # elementary only
    guards: tuple[tuple[str, str], ...] = ()    # (script name or "default", target)
    nested: "WorkflowDef | None" = None         # composite only


@dataclass(frozen=True)
class WorkflowDef:
    activities: tuple[ActivityDef, ...]
    edges: tuple[tuple[str, str], ...]


@dataclass(frozen=True)
class Job:
    job_id: str
    item_id: str
    activity: str
    required_role: str
    schema_ref: str

    def to_doc(self) -> dict:
        return {"jobId": self.job_id, "itemId": self.item_id, "activity": self.activity,
                "requiredRole": self.required_role, "schemaRef": self.schema_ref}


@dataclass
class Marking:
    """Tokens per qualified activity name (as generation lists) plus
    satisfied-edge bookkeeping for pending and-joins."""

    tokens: dict[str, list[int]] = field(default_factory=dict)
    join_wait: dict[str, set[str]] = field(default_factory=dict)
    next_gen: int = 1

    def copy(self) -> "Marking":
        return Marking(tokens={qn: list(g) for qn, g in self.tokens.items()},
                       join_wait={qn: set(s) for qn, s in self.join_wait.items()},
                       next_gen=self.next_gen)

    def place(self, qn: str) -> int:
        gen = self.next_gen
        self.next_gen += 1
        self.tokens.setdefault(qn, []).append(gen)
        return gen

    def consume(self, qn: str) -> int:
        gens = self.tokens[qn]
        gen = gens.pop(0)
        if not gens:
            del self.tokens[qn]
        return gen

    def key(self) -> tuple:
        """Generation-free state identity, used by marking exploration."""
        return (tuple(sorted((qn, len(g)) for qn, g in self.tokens.items())),
                tuple(sorted((qn, tuple(sorted(s))) for qn, s in self.join_wait.items())))

    def is_final(self) -> bool:
        return not self.join_wait and list(self.tokens) == [END] and len(self.tokens[END]) == 1

    def covers_final(self) -> bool:
        return bool(self.tokens.get(END))

    def to_doc(self) -> dict:
        return {"tokens": {qn: sorted(g) for qn, g in sorted(self.tokens.items())},
                "joinWait": {qn: sorted(s) for qn, s in sorted(self.join_wait.items())},
                "nextGen": self.next_gen}

    @staticmethod
    def from_doc(doc: dict) -> "Marking":
        return Marking(tokens={qn: list(g) for qn, g in doc["tokens"].items()},
                       join_wait={qn: set(s) for qn, s in doc["joinWait"].items()},
                       next_gen=doc["nextGen"])


@dataclass
class GraphViolation:
    code: str
    subject: str
    detail: str

    def to_doc(self) -> dict:
        return {"code": self.code, "subject": self.subject, "detail": self.detail}


@dataclass
class GraphReport:
    violations: list[GraphViolation]

    @property
    def valid(self) -> bool:
        return not self.violations

    def to_doc(self) -> dict:
        return {"valid": self.valid, "violations": [v.to_doc() for v in self.violations]}


@dataclass
class SoundnessReport:
    sound: bool
    reachable_markings: int
    counterexample: dict | None = None

    def to_doc(self) -> dict:
        return {"sound": self.sound, "reachableMarkings": self.reachable_markings,
                "counterexample": self.counterexample}


# -- flattening -----------------------------------------------------------

@dataclass
class Level:
    prefix: str                  # "" at top, else "C/" style
    owner: str | None            # qualified name of the owning composite
    activities: dict[str, ActivityDef]
    out_edges: dict[str, list[str]]
    in_edges: dict[str, list[str]]


class FlatGraph:
    """Qualified-name view of a workflow with composites resolved level by level."""

    def __init__(self, root: WorkflowDef):
        self.levels: dict[str, Level] = {}
        self.elementary: dict[str, ActivityDef] = {}
        self._build(root, prefix="", owner=None)

    def _build(self, wf: WorkflowDef, prefix: str, owner: str | None) -> None:
        activities = {a.name: a for a in wf.activities}
        out_edges: dict[str, list[str]] = {}
        in_edges: dict[str, list[str]] = {}
        for frm, to in wf.edges:
            out_edges.setdefault(frm, []).append(to)
            in_edges.setdefault(to, []).append(frm)
        self.levels[prefix] = Level(prefix=prefix, owner=owner, activities=activities,
                                    out_edges=out_edges, in_edges=in_edges)
        for act in wf.activities:
            qn = prefix + act.name
            if act.kind == "elementary":
                self.elementary[qn] = act
            else:
                self._build(act.nested, prefix=qn + "/", owner=qn)  # type: ignore[arg-type]

    def split_qname(self, qn: str) -> tuple[Level, str]:
        prefix, _, local = qn.rpartition("/")
        prefix = prefix + "/" if prefix else ""
        return self.levels[prefix], local

    def join_in_edges(self, level: Level, local: str) -> set[str]:
        return {level.prefix + src for src in level.in_edges.get(local, [])}

    def activity(self, qn: str) -> ActivityDef | None:
        level, local = self.split_qname(qn)
        return level.activities.get(local)


def flatten(wf: WorkflowDef) -> FlatGraph:
    return FlatGraph(wf)


# -- structural validation ------------------------------------------------

def validate_graph(wf: WorkflowDef) -> GraphReport:
    """Structural check; violations are data, never exceptions."""
    violations: list[GraphViolation] = []
    _validate_level(wf, "", violations)
    violations.sort(key=lambda v: (v.code, v.subject, v.detail))
    return GraphReport(violations=violations)


def _validate_level(wf: WorkflowDef, prefix: str, out: list[GraphViolation]) -> None:
    seen: set[str] = set()
    for act in wf.activities:
        if act.name in (START, END):
            out.append(GraphViolation(DUPLICATE_NAME, prefix + act.name,
                                      "reserved pseudo-node name"))
        elif act.name in seen:
            out.append(GraphViolation(DUPLICATE_NAME, prefix + act.name,
                                      "activity name repeats at this level"))
        seen.add(act.name)
    names = {a.name for a in wf.activities if a.name not in (START, END)}

    out_deg: dict[str, list[str]] = {}
    in_deg: dict[str, list[str]] = {}
    edge_seen: set[tuple[str, str]] = set()
    for frm, to in wf.edges:
        bad = False
        if frm != START and frm not in names:
            out.append(GraphViolation(BAD_EDGE, f"{prefix}{frm}->{prefix}{to}",
                                      f"unknown source {frm!r}"))
            bad = True
        if frm == END:
            out.append(GraphViolation(BAD_EDGE, f"{prefix}{frm}->{prefix}{to}",
                                      "End has no outgoing edges"))
            bad = True
        if to != END and to not in names:
            out.append(GraphViolation(BAD_EDGE, f"{prefix}{frm}->{prefix}{to}",
                                      f"unknown target {to!r}"))
            bad = True
        if to == START:
            out.append(GraphViolation(BAD_EDGE, f"{prefix}{frm}->{prefix}{to}",
                                      "Start has no incoming edges"))
            bad = True
        if (frm, to) in edge_seen:
            out.append(GraphViolation(BAD_EDGE, f"{prefix}{frm}->{prefix}{to}",
                                      "duplicate edge"))
            bad = True
        edge_seen.add((frm, to))
        if bad:
            continue
        out_deg.setdefault(frm, []).append(to)
        in_deg.setdefault(to, []).append(frm)

    if not out_deg.get(START):
        out.append(GraphViolation(NO_START, prefix + START, "no edge leaves Start"))
    elif len(out_deg[START]) > 1:
        out.append(GraphViolation(ARITY, prefix + START,
                                  "Start is a sequence split and allows one successor"))
    if not in_deg.get(END):
        out.append(GraphViolation(NO_END, prefix + END, "no edge reaches End"))

    for act in wf.activities:
        if act.name in (START, END):
            continue
        qn = prefix + act.name
        n_out = len(out_deg.get(act.name, []))
        n_in = len(in_deg.get(act.name, []))
        if act.split == "sequence" and n_out > 1:
            out.append(GraphViolation(ARITY, qn, f"sequence split with {n_out} successors"))
        if act.split in ("and", "xor") and n_out < 2:
            out.append(GraphViolation(ARITY, qn, f"{act.split} split with {n_out} successors"))
        if act.join == "none" and n_in > 1:
            out.append(GraphViolation(ARITY, qn, f"no join but {n_in} predecessors"))
        if act.join in ("and", "xor") and n_in < 2:
            out.append(GraphViolation(ARITY, qn, f"{act.join} join with {n_in} predecessors"))

        if act.split == "xor":
            successors = out_deg.get(act.name, [])
            targets = [t for _, t in act.guards]
            for succ in successors:
                if targets.count(succ) == 0:
                    out.append(GraphViolation(GUARD_MISSING, qn, f"no guard for successor {succ!r}"))
                elif targets.count(succ) > 1:
                    out.append(GraphViolation(GUARD_MISSING, qn, f"multiple guards for {succ!r}"))
            for tgt in targets:
                if tgt not in successors:
                    out.append(GraphViolation(GUARD_MISSING, qn, f"guard targets non-successor {tgt!r}"))
            defaults = [i for i, (g, _) in enumerate(act.guards) if g == "default"]
            if len(defaults) > 1:
                out.append(GraphViolation(GUARD_MISSING, qn, "more than one default guard"))
            elif defaults and defaults[0] != len(act.guards) - 1:
                out.append(GraphViolation(GUARD_MISSING, qn, "default guard must be listed last"))
        elif act.guards:
            out.append(GraphViolation(GUARD_MISSING, qn, "guards require an xor split"))

        if act.kind == "composite":
            _validate_level(act.nested, qn + "/", out)  # type: ignore[arg-type]

    # Reachability over the well-formed edges only.
    reached = _closure(START, out_deg)
    for name in sorted(names - reached):
        out.append(GraphViolation(UNREACHABLE, prefix + name, "not reachable from Start"))
    reaches_end = _closure(END, in_deg)
    for name in sorted(names - reaches_end):
        out.append(GraphViolation(DEADEND, prefix + name, "End not reachable from here"))


def _closure(origin: str, edges: dict[str, list[str]]) -> set[str]:
    seen = {origin}
    frontier = [origin]
    while frontier:
        node = frontier.pop()
        for nxt in edges.get(node, []):
            if nxt not in seen:
                seen.add(nxt)
                frontier.append(nxt)
    return seen - {origin}


# -- token semantics ------------------------------------------------------

# chooser(split_qname, activity, successor_names) -> chosen successor name
Chooser = Callable[[str, ActivityDef, list[str]], str]


def initial_marking(flat: FlatGraph) -> Marking:
    """One token moved onto Start's successor, descending through composites."""
    marking = Marking()
    level = flat.levels[""]
    _move(flat, marking, level, START, level.out_edges[START][0], _no_choice, [])
    return marking


def _no_choice(qn: str, act: ActivityDef, targets: list[str]) -> str:
    # Reachable only when a composite completes instantly (nested Start->End)
    # and its split is xor: there is no outcome to route on yet.
    raise EngineError(SCRIPT_ERROR, f"xor choice at {qn} before any job ran")


def advance(flat: FlatGraph, marking: Marking, qn: str,
            chooser: Chooser) -> tuple[Marking, list[list[str]]]:
    """Consume the oldest token on `qn` and advance it; returns the new
    marking and the xor decisions taken (as [split, target] pairs)."""
    new = marking.copy()
    new.consume(qn)
    decisions: list[list[str]] = []
    level, local = flat.split_qname(qn)
    _complete(flat, new, level, local, chooser, decisions)
    return new, decisions


def _complete(flat: FlatGraph, marking: Marking, level: Level, local: str,
              chooser: Chooser, decisions: list[list[str]]) -> None:
    act = level.activities[local]
    targets = level.out_edges.get(local, [])
    if act.split == "and":
        for target in targets:
            _move(flat, marking, level, local, target, chooser, decisions)
    elif act.split == "xor":
        chosen = chooser(level.prefix + local, act, list(targets))
        decisions.append([level.prefix + local, chosen])
        _move(flat, marking, level, local, chosen, chooser, decisions)
    else:
        _move(flat, marking, level, local, targets[0], chooser, decisions)


def _move(flat: FlatGraph, marking: Marking, level: Level, source: str, target: str,
          chooser: Chooser, decisions: list[list[str]]) -> None:
    if target == END:
        if level.owner is None:
            marking.place(END)
            return
        owner_level, owner_local = flat.split_qname(level.owner)
        _complete(flat, marking, owner_level, owner_local, chooser, decisions)
        return
    act = level.activities[target]
    if act.join == "and":
        target_qn = level.prefix + target
        waits = marking.join_wait.setdefault(target_qn, set())
        waits.add(level.prefix + source)
        if waits == flat.join_in_edges(level, target):
            del marking.join_wait[target_qn]
            _enter(flat, marking, level, target, chooser, decisions)
        return
    _enter(flat, marking, level, target, chooser, decisions)


def _enter(flat: FlatGraph, marking: Marking, level: Level, local: str,
           chooser: Chooser, decisions: list[list[str]]) -> None:
    act = level.activities[local]
    if act.kind == "composite":
        nested = flat.levels[level.prefix + local + "/"]
        _move(flat, marking, nested, START, nested.out_edges[START][0], chooser, decisions)
    else:
        marking.place(level.prefix + local)


class _NeedChoice(Exception):
    def __init__(self, options: list[str]):
        self.options = options


def advance_all(flat: FlatGraph, marking: Marking, qn: str) -> list[tuple[Marking, list[list[str]]]]:
    """Every marking reachable by one completion of `qn`, branching over all
    xor choices encountered (free-choice view used by exploration)."""
    results: list[tuple[Marking, list[list[str]]]] = []
    vectors: list[list[str]] = [[]]
    while vectors:
        vector = vectors.pop()
        replay = list(vector)

        def chooser(_qn: str, _act: ActivityDef, targets: list[str]) -> str:
            if replay:
                return replay.pop(0)
            raise _NeedChoice(targets)

        try:
            results.append(advance(flat, marking, qn, chooser))
        except _NeedChoice as need:
            for option in need.options:
                vectors.append(vector + [option])
    return results


# -- exhaustive exploration ----------------------------------------------

def explore(flat: FlatGraph, seed: Marking,
            state_bound: int = DEFAULT_STATE_BOUND) -> SoundnessReport:
    """Breadth-first exploration of the marking graph from `seed`.

    Sound iff the final marking (one token on End, nothing else pending) is
    reachable from every reachable marking and no reachable marking strictly
    contains it.
    """
    seed = seed.copy()
    states: dict[tuple, Marking] = {seed.key(): seed}
    parent: dict[tuple, tuple | None] = {seed.key(): None}
    edges_rev: dict[tuple, set[tuple]] = {}
    final_keys: set[tuple] = set()
    queue = [seed.key()]

    def trace(key: tuple, reason: str) -> dict:
        steps: list[dict] = []
        cursor = key
        while parent[cursor] is not None:
            prev_key, step = parent[cursor]  # type: ignore[misc]
            steps.append(step)
            cursor = prev_key
        steps.reverse()
        return {"steps": steps, "marking": states[key].to_doc(), "reason": reason}

    while queue:
        key = queue.pop(0)
        marking = states[key]
        if marking.covers_final() and not marking.is_final():
            return SoundnessReport(sound=False, reachable_markings=len(states),
                                   counterexample=trace(key, "contains completion plus leftovers"))
        if marking.is_final():
            final_keys.add(key)
            continue
        for qn in sorted(marking.tokens):
            if qn == END:
                continue
            for nxt, decisions in advance_all(flat, marking, qn):
                nkey = nxt.key()
                if nkey not in states:
                    if len(states) >= state_bound:
                        raise EngineError(BOUND_EXCEEDED,
                                          f"more than {state_bound} reachable markings",
                                          detail={"stateBound": state_bound})
                    states[nkey] = nxt
                    parent[nkey] = (key, {"execute": qn, "decisions": decisions})
                    queue.append(nkey)
                edges_rev.setdefault(nkey, set()).add(key)

    # Backward reachability from completion.
    can_finish = set(final_keys)
    frontier = list(final_keys)
    while frontier:
        key = frontier.pop()
        for prev in edges_rev.get(key, ()):
            if prev not in can_finish:
                can_finish.add(prev)
                frontier.append(prev)
    stuck = [k for k in states if k not in can_finish]
    if stuck:
        return SoundnessReport(sound=False, reachable_markings=len(states),
                               counterexample=trace(stuck[0], "completion unreachable"))
    return SoundnessReport(sound=True, reachable_markings=len(states))


def check_soundness(wf: WorkflowDef, state_bound: int = DEFAULT_STATE_BOUND) -> SoundnessReport:
    """Exhaustive soundness decision over the whole marking graph."""
    flat = flatten(wf)
    return explore(flat, initial_marking(flat), state_bound)


# -- jobs -----------------------------------------------------------------

def job_id_for(item_id: str, qn: str, generation: int) -> str:
    import hashlib
    digest = hashlib.sha256(f"{item_id}:{qn}:{generation}".encode("utf-8")).hexdigest()
    return digest[:32]


def jobs_for_marking(flat: FlatGraph, item_id: str, marking: Marking) -> list[Job]:
    """One job per token resting on an elementary activity, unfiltered by role."""
    jobs: list[Job] = []
    for qn in sorted(marking.tokens):
        act = flat.elementary.get(qn)
        if act is None:
            continue
        for gen in sorted(marking.tokens[qn]):
            jobs.append(Job(job_id=job_id_for(item_id, qn, gen), item_id=item_id,
                            activity=qn, required_role=act.role or "",
                            schema_ref=act.schema_ref or ""))
    return jobs
