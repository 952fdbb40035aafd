"""HTTP/JSON surface over the engine.

Plain stdlib threaded server.  Every response body is canonical JSON;
engine errors map onto HTTP statuses through one fixed table keyed by
error code, so clients can rely on both the code and the status.
"""

from __future__ import annotations

import re
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path
from urllib.parse import parse_qs, urlparse

from . import errors as E
from .canonical import dump_bytes, loads
from .engine import Engine
from .errors import EngineError

STATUS_BY_CODE = {
    E.PARSE_ERROR: 400, E.SYNTAX: 400,
    E.ROLE_DENIED: 403,
    E.UNKNOWN_DESCRIPTION: 404, E.UNKNOWN_VERSION: 404, E.UNKNOWN_ITEM: 404,
    E.NOT_FOUND: 404,
    E.UNKNOWN_JOB: 409, E.STALE_PLAN: 409,
    E.GRAPH_INVALID: 422, E.DANGLING_REF: 422, E.SCHEMA_PARSE: 422,
    E.OUTCOME_INVALID: 422, E.PROPERTY_TYPE_MISMATCH: 422,
    E.UNDECLARED_PROPERTY: 422, E.IMMUTABLE_PROPERTY: 422, E.UNKNOWN_TARGET: 422,
    E.MEMBER_TYPE_FORBIDDEN: 422, E.DUPLICATE_MEMBER: 422, E.SCRIPT_ERROR: 422,
    E.TYPE_ERROR: 422, E.MISSING_PATH: 422, E.NOT_BOOLEAN: 422, E.DIV_ZERO: 422,
    E.SEVEN_W_INCOMPLETE: 422, E.BOUND_EXCEEDED: 422, E.NAME_MISMATCH: 422,
    E.MIGRATION_ORPHAN: 422, E.MIGRATION_UNSOUND: 422, E.BAD_REMAP: 422,
    E.STORE_FAILURE: 500, E.IO_FAILURE: 500, E.CORRUPT: 500,
    E.FOLD_GAP: 500, E.FOLD_ILLEGAL: 500,
}

DEFAULT_LIMIT = 500

_ITEM_ID = r"([0-9a-f]{32})"
_NAME = r"([^/]+)"

_CONTENT_TYPES = {".html": "text/html; charset=utf-8",
                  ".js": "text/javascript; charset=utf-8",
                  ".css": "text/css; charset=utf-8",
                  ".map": "application/json",
                  ".json": "application/json",
                  ".svg": "image/svg+xml",
                  ".png": "image/png",
                  ".ico": "image/x-icon"}


def _bad(message: str, detail=None) -> EngineError:
    return EngineError(E.PARSE_ERROR, message, detail=detail)


def _need(body: dict, key: str, types: tuple | type, hint: str):
    if key not in body:
        raise _bad(f"request body needs {key!r} ({hint})")
    value = body[key]
    ok = isinstance(value, types)
    if ok and types is int and isinstance(value, bool):
        ok = False
    if ok and types is str and not value:
        ok = False
    if not ok:
        raise _bad(f"{key!r} must be {hint}")
    return value


def _agent_of(body: dict, headers) -> str:
    agent = body.get("agent") or headers.get("X-Agent")
    if not isinstance(agent, str) or not agent:
        raise _bad("an agent id is required (body field 'agent' or X-Agent header)")
    return agent


def _int_param(query: dict, key: str, default: int) -> int:
    values = query.get(key)
    if not values:
        return default
    try:
        parsed = int(values[0])
    except ValueError:
        raise _bad(f"query parameter {key!r} must be an integer")
    if parsed < 1:
        raise _bad(f"query parameter {key!r} must be positive")
    return parsed


def _str_param(query: dict, key: str) -> str | None:
    values = query.get(key)
    return values[0] if values else None


class Api:
    """Route table and handlers, independent of the HTTP plumbing."""

    def __init__(self, engine: Engine, ui_dir: str | None = None):
        self.engine = engine
        self.ui_dir = Path(ui_dir).resolve() if ui_dir else None
        self.routes = [
            ("GET", re.compile(r"^/descriptions$"), self.list_descriptions),
            ("GET", re.compile(rf"^/descriptions/{_NAME}$"), self.get_description),
            ("GET", re.compile(rf"^/descriptions/{_NAME}/(\d+)$"), self.get_bundle),
            ("POST", re.compile(rf"^/descriptions/{_NAME}$"), self.register),
            ("GET", re.compile(r"^/items$"), self.list_items),
            ("POST", re.compile(r"^/items$"), self.create_item),
            ("GET", re.compile(rf"^/items/{_ITEM_ID}$"), self.get_item),
            ("GET", re.compile(rf"^/items/{_ITEM_ID}/jobs$"), self.list_jobs),
            ("POST", re.compile(rf"^/items/{_ITEM_ID}/jobs/{_ITEM_ID}$"), self.execute_job),
            ("POST", re.compile(rf"^/items/{_ITEM_ID}/migrate/check$"), self.migrate_check),
            ("POST", re.compile(rf"^/items/{_ITEM_ID}/migrate/apply$"), self.migrate_apply),
            ("GET", re.compile(rf"^/items/{_ITEM_ID}/events$"), self.get_events),
            ("GET", re.compile(rf"^/items/{_ITEM_ID}/prov$"), self.get_prov),
            ("GET", re.compile(r"^/agents$"), self.list_agents),
        ]

    def dispatch(self, method: str, path: str, query: dict, body: dict, headers):
        for route_method, pattern, handler in self.routes:
            match = pattern.match(path)
            if match and route_method == method:
                return handler(match, query, body, headers)
        raise EngineError(E.NOT_FOUND, f"no route {method} {path}")

    # -- descriptions --

    def list_descriptions(self, match, query, body, headers) -> dict:
        names = self.engine.store.description_names()
        return {"descriptions": [{"name": n,
                                  "versions": self.engine.store.description_versions(n)}
                                 for n in names]}

    def get_description(self, match, query, body, headers) -> dict:
        name = match.group(1)
        versions = self.engine.store.description_versions(name)
        if not versions:
            raise EngineError(E.UNKNOWN_DESCRIPTION, f"no description named {name!r}")
        return {"name": name, "versions": versions}

    def get_bundle(self, match, query, body, headers) -> dict:
        name, version = match.group(1), int(match.group(2))
        if version not in self.engine.store.description_versions(name):
            if not self.engine.store.description_versions(name):
                raise EngineError(E.UNKNOWN_DESCRIPTION, f"no description named {name!r}")
            raise EngineError(E.UNKNOWN_VERSION, f"{name} has no version {version}")
        return self.engine.store.description_doc(name, version)

    def register(self, match, query, body, headers) -> dict:
        name = match.group(1)
        # The body is the bundle itself; {"bundle": ..., "agent": ..., "why": ...}
        # is also accepted so callers without header control can name the agent.
        if "bundle" in body:
            bundle = _need(body, "bundle", dict, "the description bundle")
            agent = _agent_of(body, headers)
            why = body.get("why")
        else:
            bundle = body
            agent = _agent_of({}, headers)
            why = _str_param(query, "why")
        if bundle.get("name") != name:
            raise EngineError(E.NAME_MISMATCH,
                              f"path names {name!r} but bundle names "
                              f"{bundle.get('name')!r}")
        desc, soundness = self.engine.register_description(bundle, agent, why=why)
        return {"name": desc.name, "version": desc.version,
                "soundness": soundness.to_doc()}

    # -- items --

    def list_items(self, match, query, body, headers) -> list:
        limit = _int_param(query, "limit", DEFAULT_LIMIT)
        return self.engine.list_items(limit=limit)

    def create_item(self, match, query, body, headers) -> dict:
        name = _need(body, "descriptionName", str, "a description name")
        version = _need(body, "version", int, "a version number")
        item_name = _need(body, "name", str, "the new item's name")
        overrides = body.get("initialProperties", {})
        if not isinstance(overrides, dict):
            raise _bad("'initialProperties' must be an object")
        agent = _agent_of(body, headers)
        item = self.engine.instantiate_item(name, version, item_name, overrides,
                                            agent, why=body.get("why"))
        return item.to_doc()

    def get_item(self, match, query, body, headers) -> dict:
        return self.engine.get_item(match.group(1)).to_doc()

    def list_jobs(self, match, query, body, headers) -> dict:
        agent = _str_param(query, "agent")
        if not agent:
            raise _bad("query parameter 'agent' is required")
        jobs = self.engine.list_jobs(match.group(1), agent)
        return {"jobs": [job.to_doc() for job in jobs]}

    def execute_job(self, match, query, body, headers) -> dict:
        if "outcome" not in body:
            raise _bad("request body needs 'outcome'")
        agent = _agent_of(body, headers)
        item = self.engine.execute_job(match.group(1), match.group(2), body["outcome"],
                                       agent, why=body.get("why"))
        return item.to_doc()

    # -- migration --

    def migrate_check(self, match, query, body, headers) -> dict:
        to_version = _need(body, "toVersion", int, "a version number")
        remap = body.get("remap", {})
        if not isinstance(remap, dict):
            raise _bad("'remap' must be an object")
        plan = self.engine.migrate_check(match.group(1), to_version, remap)
        return plan.to_doc()

    def migrate_apply(self, match, query, body, headers) -> dict:
        plan = _need(body, "plan", dict, "a migration plan document")
        agent = _agent_of(body, headers)
        item = self.engine.migrate_apply(match.group(1), plan, agent,
                                         why=body.get("why"))
        return item.to_doc()

    # -- events, provenance, agents --

    def get_events(self, match, query, body, headers) -> dict:
        events = self.engine.events_for(match.group(1),
                                        what=_str_param(query, "what"),
                                        who=_str_param(query, "who"),
                                        time_from=_str_param(query, "from"),
                                        time_to=_str_param(query, "to"),
                                        limit=_int_param(query, "limit", DEFAULT_LIMIT))
        return {"events": [ev.to_doc() for ev in events]}

    def get_prov(self, match, query, body, headers) -> dict:
        return self.engine.prov_for(match.group(1))

    def list_agents(self, match, query, body, headers) -> dict:
        return {"agents": self.engine.list_agents()}

    # -- static UI --

    def static_file(self, path: str) -> tuple[bytes, str] | None:
        if self.ui_dir is None:
            return None
        rel = "index.html" if path == "/" else path.lstrip("/")
        target = (self.ui_dir / rel).resolve()
        if not str(target).startswith(str(self.ui_dir)) or not target.is_file():
            return None
        ctype = _CONTENT_TYPES.get(target.suffix, "application/octet-stream")
        return target.read_bytes(), ctype


def make_server(engine: Engine, host: str = "127.0.0.1", port: int = 8400,
                ui_dir: str | None = None) -> ThreadingHTTPServer:
    api = Api(engine, ui_dir=ui_dir)

    class Handler(BaseHTTPRequestHandler):
        protocol_version = "HTTP/1.1"

        def log_message(self, fmt, *args):
            pass

        def _reply(self, status: int, doc) -> None:
            blob = dump_bytes(doc) + b"\n"
            self.send_response(status)
            self.send_header("Content-Type", "application/json")
            self.send_header("Content-Length", str(len(blob)))
            self.end_headers()
            self.wfile.write(blob)

        def _reply_raw(self, blob: bytes, ctype: str) -> None:
            self.send_response(200)
            self.send_header("Content-Type", ctype)
            self.send_header("Content-Length", str(len(blob)))
            self.end_headers()
            self.wfile.write(blob)

        def _handle(self, method: str) -> None:
            parsed = urlparse(self.path)
            query = parse_qs(parsed.query)
            body: dict = {}
            try:
                if method == "POST":
                    length = int(self.headers.get("Content-Length") or 0)
                    raw = self.rfile.read(length) if length else b""
                    if raw:
                        try:
                            body = loads(raw.decode("utf-8"))
                        except ValueError:
                            raise _bad("request body is not valid JSON")
                        if not isinstance(body, dict):
                            raise _bad("request body must be a JSON object")
                elif method == "GET":
                    static = api.static_file(parsed.path)
                    if static is not None:
                        self._reply_raw(*static)
                        return
                doc = api.dispatch(method, parsed.path, query, body, self.headers)
                self._reply(200, doc)
            except EngineError as err:
                self._reply(STATUS_BY_CODE.get(err.code, 500), err.to_doc())
            except Exception as err:  # noqa: BLE001 - last-resort server guard
                self._reply(500, {"code": E.IO_FAILURE, "message": str(err)})

        def do_GET(self):
            self._handle("GET")

        def do_POST(self):
            self._handle("POST")

    try:
        return ThreadingHTTPServer((host, port), Handler)
    except OSError as err:
        raise EngineError(E.BIND_FAILURE, f"cannot bind {host}:{port}: {err}")
