"""Command line entry point.

Exit codes: 0 on success, 1 when validation or verification fails,
2 for usage errors (argparse's own), 3 for store or I/O trouble.
The store directory comes from --store or the DDFLOW_STORE variable.
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

from . import workflow as wf
from .canonical import dumps, loads
from .engine import Engine
from .errors import (BIND_FAILURE, CORRUPT, EngineError, FOLD_GAP, FOLD_ILLEGAL,
                     IO_FAILURE, PARSE_ERROR, STORE_FAILURE)
from .identity import FixedClock, IdGenerator
from .model import parse_bundle
from .server import make_server
from .store import open_store

_IO_CODES = {STORE_FAILURE, IO_FAILURE, CORRUPT, BIND_FAILURE, FOLD_GAP, FOLD_ILLEGAL}


def _json_value(text: str):
    """Inline JSON, or @path to read it from a file, or '-' for stdin."""
    if text == "-":
        raw = sys.stdin.read()
    elif text.startswith("@"):
        raw = Path(text[1:]).read_text(encoding="utf-8")
    else:
        raw = text
    try:
        return loads(raw)
    except ValueError as err:
        raise EngineError(PARSE_ERROR, f"not valid JSON: {err}")


def _emit(args, doc, text: str | None = None) -> None:
    if args.json or text is None:
        print(dumps(doc))
    else:
        print(text)


def _open_engine(args) -> tuple:
    store_dir = args.store or os.environ.get("DDFLOW_STORE")
    if not store_dir:
        print("error: no store directory (use --store or set DDFLOW_STORE)",
              file=sys.stderr)
        raise SystemExit(2)
    store = open_store(store_dir, node_name=getattr(args, "node", None))
    for warning in store.warnings:
        print(f"warning: {warning}", file=sys.stderr)
    clock = FixedClock() if args.fixed_clock else None
    ids = IdGenerator(args.seed) if args.seed is not None else None
    return store, Engine(store, clock=clock, ids=ids)


# -- commands -------------------------------------------------------------

def cmd_validate(args) -> int:
    try:
        desc = parse_bundle(_json_value(args.bundle))
    except EngineError as err:
        _emit(args, {"valid": False, "error": err.to_doc()},
              f"invalid: {err.code}: {err.message}")
        return 1
    report = wf.validate_graph(desc.workflow)
    if not report.valid:
        _emit(args, {"valid": False, "graph": report.to_doc(), "soundness": None},
              "invalid graph:\n" + "\n".join(
                  f"  {v.code} {v.subject}: {v.detail}" for v in report.violations))
        return 1
    try:
        soundness = wf.check_soundness(desc.workflow, args.state_bound)
    except EngineError as err:
        _emit(args, {"valid": False, "graph": report.to_doc(), "error": err.to_doc()},
              f"soundness undecided: {err.code}: {err.message}")
        return 1
    doc = {"valid": soundness.sound, "graph": report.to_doc(),
           "soundness": soundness.to_doc()}
    if not soundness.sound:
        _emit(args, doc, f"unsound: {soundness.counterexample}")
        return 1
    _emit(args, doc,
          f"ok: sound, {soundness.reachable_markings} reachable markings")
    return 0


def cmd_load(args) -> int:
    store, engine = _open_engine(args)
    with store:
        desc, soundness = engine.register_description(_json_value(args.bundle),
                                                      args.agent, why=args.why)
        _emit(args, {"name": desc.name, "version": desc.version,
                     "soundness": soundness.to_doc()},
              f"registered {desc.name} version {desc.version}")
    return 0


def cmd_serve(args) -> int:
    store, engine = _open_engine(args)
    host, _, port = args.bind.rpartition(":")
    try:
        httpd = make_server(engine, host or "127.0.0.1", int(port), ui_dir=args.ui)
    except ValueError:
        print(f"error: bad bind address {args.bind!r}", file=sys.stderr)
        store.close()
        return 2
    except EngineError:
        store.close()
        raise
    print(f"listening on {httpd.server_address[0]}:{httpd.server_address[1]}, "
          f"store {store.root}, node {store.node_name}", file=sys.stderr)
    try:
        httpd.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        httpd.server_close()
        store.close()
    return 0


def cmd_new_item(args) -> int:
    store, engine = _open_engine(args)
    with store:
        overrides = _json_value(args.properties) if args.properties else {}
        item = engine.instantiate_item(args.description, args.version, args.name,
                                       overrides, args.agent, why=args.why)
        _emit(args, item.to_doc(), f"created {item.id}")
    return 0


def cmd_jobs(args) -> int:
    store, engine = _open_engine(args)
    with store:
        jobs = engine.list_jobs(args.item, args.agent)
        _emit(args, {"jobs": [j.to_doc() for j in jobs]},
              "\n".join(f"{j.job_id}  {j.activity}  role={j.required_role}"
                        for j in jobs) or "no jobs")
    return 0


def cmd_execute(args) -> int:
    store, engine = _open_engine(args)
    with store:
        item = engine.execute_job(args.item, args.job, _json_value(args.outcome),
                                  args.agent, why=args.why)
        _emit(args, item.to_doc(),
              f"executed; item {'finished' if item.finished else 'running'}, "
              f"seq {item.last_event_seq}")
    return 0


def cmd_events(args) -> int:
    store, engine = _open_engine(args)
    with store:
        events = engine.events_for(args.item, what=args.what, who=args.who,
                                   time_from=args.time_from, time_to=args.time_to,
                                   limit=args.limit)
        _emit(args, {"events": [e.to_doc() for e in events]},
              "\n".join(f"{e.seq:>4}  {e.when}  {e.what:<18} {e.who:<12} {e.how}"
                        for e in events) or "no events")
    return 0


def cmd_prov(args) -> int:
    store, engine = _open_engine(args)
    with store:
        print(dumps(engine.prov_for(args.item)))
    return 0


def cmd_verify(args) -> int:
    store, engine = _open_engine(args)
    with store:
        report = engine.verify_store()
        _emit(args, report,
              f"{report['items']} items replayed, {len(report['mismatches'])} mismatches")
        return 1 if report["mismatches"] else 0


def cmd_migrate_check(args) -> int:
    store, engine = _open_engine(args)
    with store:
        remap = _json_value(args.remap) if args.remap else {}
        plan = engine.migrate_check(args.item, args.to_version, remap)
        _emit(args, plan.to_doc(),
              f"ok: {len(plan.token_map)} tokens map, notes:\n" +
              ("\n".join(f"  {n}" for n in plan.notes) or "  none"))
    return 0


def cmd_migrate_apply(args) -> int:
    store, engine = _open_engine(args)
    with store:
        item = engine.migrate_apply(args.item, _json_value(args.plan), args.agent,
                                    why=args.why)
        _emit(args, item.to_doc(),
              f"migrated to version {item.description_version}")
    return 0


def cmd_add_agent(args) -> int:
    store, engine = _open_engine(args)
    with store:
        agent = engine.register_agent(args.id, args.name,
                                      [r for r in args.roles.split(",") if r])
        _emit(args, agent.to_doc(), f"agent {agent.id} roles {','.join(agent.roles)}")
    return 0


# -- parser ---------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ddflow",
                                     description="event-sourced workflow engine")
    parser.add_argument("--store", help="store directory (or DDFLOW_STORE)")
    parser.add_argument("--json", action="store_true", help="machine-readable output")
    parser.add_argument("--seed", type=int, default=None,
                        help="deterministic item id generation")
    parser.add_argument("--fixed-clock", action="store_true",
                        help="deterministic timestamps (for reproducible stores)")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="check a bundle without a store")
    p.add_argument("bundle", help="bundle JSON, @file, or - for stdin")
    p.add_argument("--state-bound", type=int, default=wf.DEFAULT_STATE_BOUND)
    p.set_defaults(fn=cmd_validate)

    p = sub.add_parser("load", help="register a bundle as a new version")
    p.add_argument("bundle")
    p.add_argument("--agent", required=True)
    p.add_argument("--why")
    p.set_defaults(fn=cmd_load)

    p = sub.add_parser("serve", help="run the HTTP server")
    p.add_argument("--bind", default="127.0.0.1:8400")
    p.add_argument("--node", help="node name recorded on first open")
    p.add_argument("--ui", help="directory of static console files")
    p.set_defaults(fn=cmd_serve)

    p = sub.add_parser("new-item", help="instantiate an item")
    p.add_argument("--description", required=True)
    p.add_argument("--version", type=int, required=True)
    p.add_argument("--name", required=True)
    p.add_argument("--properties", help="property overrides as JSON or @file")
    p.add_argument("--agent", required=True)
    p.add_argument("--why")
    p.set_defaults(fn=cmd_new_item)

    p = sub.add_parser("jobs", help="list an agent's runnable jobs on an item")
    p.add_argument("--item", required=True)
    p.add_argument("--agent", required=True)
    p.set_defaults(fn=cmd_jobs)

    p = sub.add_parser("execute", help="execute a job with an outcome")
    p.add_argument("--item", required=True)
    p.add_argument("--job", required=True)
    p.add_argument("--outcome", required=True, help="outcome JSON, @file, or -")
    p.add_argument("--agent", required=True)
    p.add_argument("--why")
    p.set_defaults(fn=cmd_execute)

    p = sub.add_parser("events", help="filter an item's event log")
    p.add_argument("--item", required=True)
    p.add_argument("--what")
    p.add_argument("--who")
    p.add_argument("--from", dest="time_from")
    p.add_argument("--to", dest="time_to")
    p.add_argument("--limit", type=int, default=500)
    p.set_defaults(fn=cmd_events)

    p = sub.add_parser("prov", help="export an item's provenance document")
    p.add_argument("--item", required=True)
    p.set_defaults(fn=cmd_prov)

    p = sub.add_parser("verify", help="replay every item and reconcile snapshots")
    p.set_defaults(fn=cmd_verify)

    p = sub.add_parser("migrate-check", help="plan a migration to another version")
    p.add_argument("--item", required=True)
    p.add_argument("--to-version", type=int, required=True)
    p.add_argument("--remap", help="explicit activity mapping as JSON")
    p.set_defaults(fn=cmd_migrate_check)

    p = sub.add_parser("migrate-apply", help="apply a checked migration plan")
    p.add_argument("--item", required=True)
    p.add_argument("--plan", required=True, help="plan JSON, @file, or -")
    p.add_argument("--agent", required=True)
    p.add_argument("--why")
    p.set_defaults(fn=cmd_migrate_apply)

    p = sub.add_parser("add-agent", help="add or replace an agent in the roster")
    p.add_argument("--id", required=True)
    p.add_argument("--name", required=True)
    p.add_argument("--roles", required=True, help="comma-separated role names")
    p.set_defaults(fn=cmd_add_agent)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except EngineError as err:
        if args.json:
            print(dumps({"error": err.to_doc()}), file=sys.stderr)
        else:
            print(f"error {err.code}: {err.message}", file=sys.stderr)
        return 3 if err.code in _IO_CODES else 1
    except OSError as err:
        print(f"error: {err}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
