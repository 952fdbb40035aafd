"""File-backed durable storage.

One directory per store: an advisory lock file, a node identity file,
registered description bundles as canonical JSON, one append-only JSON
Lines event log per item, plus disposable snapshots and the agent
roster.  Appends are acknowledged only after write+flush+fsync.  A
trailing half-written line in a log (a torn write from a crash) is
truncated on open with a warning; any other corruption is an error.
"""

from __future__ import annotations

import os
import threading
from dataclasses import dataclass
from pathlib import Path

from .canonical import dump_bytes, dump_line, loads
from .errors import CORRUPT, EngineError, IO_FAILURE, STORE_FAILURE, UNKNOWN_ITEM
from .provenance import Event

_TAIL_CHUNK = 65536


@dataclass(frozen=True)
class Agent:
    id: str
    display_name: str
    roles: tuple[str, ...]

    def to_doc(self) -> dict:
        return {"id": self.id, "displayName": self.display_name, "roles": list(self.roles)}


class Store:
    """Single-process handle on a store directory.  The lock file keeps a
    second process out; stale locks from dead processes are stolen."""

    def __init__(self, root: Path, node_name: str, warnings: list[str]):
        self.root = root
        self.node_name = node_name
        self.warnings = warnings
        self._mutex = threading.Lock()
        self._registry: dict[str, dict[int, dict]] = {}      # parsed bundle cache
        self._versions: dict[str, list[int]] = {}
        self._index: dict[str, dict] = {}                    # itemId -> {description, kind}
        self._last_seq: dict[str, int] = {}
        self.agents: dict[str, Agent] = {}

    # -- lifecycle --

    def close(self) -> None:
        lock = self.root / "lock"
        try:
            if lock.exists() and lock.read_text().strip() == str(os.getpid()):
                lock.unlink()
        except OSError:
            pass

    def __enter__(self) -> "Store":
        return self

    def __exit__(self, *exc) -> None:
        self.close()

    # -- descriptions --

    def description_names(self) -> list[str]:
        return sorted(self._versions)

    def description_versions(self, name: str) -> list[int]:
        return list(self._versions.get(name, []))

    def description_bytes(self, name: str, version: int) -> bytes:
        path = self.root / "descriptions" / name / f"{version}.json"
        try:
            return path.read_bytes()
        except FileNotFoundError:
            raise EngineError(STORE_FAILURE, f"description file missing: {name} v{version}")

    def description_doc(self, name: str, version: int) -> dict:
        with self._mutex:
            cached = self._registry.get(name, {}).get(version)
        if cached is not None:
            return cached
        raw = self.description_bytes(name, version)
        try:
            doc = loads(raw.decode("utf-8"))
        except ValueError:
            raise EngineError(CORRUPT, f"description {name} v{version} is not valid JSON",
                              detail={"path": f"descriptions/{name}/{version}.json"})
        with self._mutex:
            self._registry.setdefault(name, {})[version] = doc
        return doc

    def put_description(self, name: str, version: int, doc: dict) -> None:
        folder = self.root / "descriptions" / name
        folder.mkdir(parents=True, exist_ok=True)
        path = folder / f"{version}.json"
        if path.exists():
            raise EngineError(STORE_FAILURE,
                              f"description {name} v{version} already published")
        _write_durable(path, dump_bytes(doc) + b"\n")
        with self._mutex:
            self._registry.setdefault(name, {})[version] = doc
            versions = self._versions.setdefault(name, [])
            versions.append(version)
            versions.sort()

    # -- items --

    def item_ids(self) -> list[str]:
        with self._mutex:
            return sorted(self._index)

    def has_item(self, item_id: str) -> bool:
        with self._mutex:
            return item_id in self._index

    def item_entry(self, item_id: str) -> dict:
        with self._mutex:
            entry = self._index.get(item_id)
        if entry is None:
            raise EngineError(UNKNOWN_ITEM, f"no item {item_id!r}")
        return entry

    def last_seq(self, item_id: str) -> int:
        with self._mutex:
            return self._last_seq.get(item_id, 0)

    def _events_path(self, item_id: str) -> Path:
        return self.root / "items" / item_id / "events.jsonl"

    def read_events(self, item_id: str) -> list[Event]:
        path = self._events_path(item_id)
        try:
            raw = path.read_bytes()
        except FileNotFoundError:
            raise EngineError(UNKNOWN_ITEM, f"no item {item_id!r}")
        events = []
        for lineno, line in enumerate(raw.splitlines(), start=1):
            if not line:
                continue
            try:
                doc = loads(line.decode("utf-8"))
                events.append(Event.from_doc(doc))
            except (ValueError, EngineError):
                raise EngineError(CORRUPT, f"bad event at {path.name}:{lineno}",
                                  detail={"path": f"items/{item_id}/events.jsonl",
                                          "line": lineno})
        return events

    def append_events(self, item_id: str, events: list[Event]) -> None:
        """Durable batch append: one write, flushed and fsynced, then ack."""
        if not events:
            return
        folder = self.root / "items" / item_id
        created = not folder.exists()
        folder.mkdir(parents=True, exist_ok=True)
        path = folder / "events.jsonl"
        blob = b"".join(dump_line(ev.to_doc()) for ev in events)
        try:
            with open(path, "ab") as f:
                f.write(blob)
                f.flush()
                os.fsync(f.fileno())
            if created:
                _fsync_dir(folder)
                _fsync_dir(folder.parent)
        except OSError as err:
            raise EngineError(IO_FAILURE, f"append failed: {err}")
        with self._mutex:
            self._last_seq[item_id] = events[-1].seq
            if item_id not in self._index:
                first = events[0].payload
                self._index[item_id] = {"description": first.get("description", ""),
                                        "kind": first.get("kind", "item")}

    # -- snapshots --

    def _snapshot_path(self, item_id: str) -> Path:
        return self.root / "items" / item_id / "snapshot.json"

    def read_snapshot(self, item_id: str) -> dict | None:
        try:
            raw = self._snapshot_path(item_id).read_bytes()
            return loads(raw.decode("utf-8"))
        except (OSError, ValueError):
            return None  # snapshots are disposable caches

    def write_snapshot(self, item_id: str, doc: dict) -> None:
        try:
            self._snapshot_path(item_id).write_bytes(dump_bytes(doc) + b"\n")
        except OSError:
            pass

    def snapshot_bytes(self, item_id: str) -> bytes | None:
        try:
            return self._snapshot_path(item_id).read_bytes()
        except OSError:
            return None

    # -- agents --

    def save_agents(self) -> None:
        docs = [self.agents[aid].to_doc() for aid in sorted(self.agents)]
        _write_durable(self.root / "agents.json", dump_bytes(docs) + b"\n")

    def load_agents(self) -> None:
        try:
            raw = (self.root / "agents.json").read_bytes()
        except FileNotFoundError:
            self.agents = {}
            return
        try:
            docs = loads(raw.decode("utf-8"))
            self.agents = {d["id"]: Agent(id=d["id"], display_name=d["displayName"],
                                          roles=tuple(d["roles"]))
                           for d in docs}
        except (ValueError, KeyError, TypeError):
            raise EngineError(CORRUPT, "agents.json is not readable",
                              detail={"path": "agents.json"})


def open_store(root: str | os.PathLike, node_name: str | None = None) -> Store:
    """Create or open a store directory, acquiring its lock.

    Event logs get torn-write recovery here: a final line without its
    newline terminator is dropped, with a warning, before anything reads
    the log.
    """
    rootp = Path(root)
    try:
        rootp.mkdir(parents=True, exist_ok=True)
        (rootp / "descriptions").mkdir(exist_ok=True)
        (rootp / "items").mkdir(exist_ok=True)
    except OSError as err:
        raise EngineError(IO_FAILURE, f"cannot create store at {rootp}: {err}")

    _acquire_lock(rootp / "lock")

    node_path = rootp / "node"
    if node_path.exists():
        node = node_path.read_text(encoding="utf-8").strip()
    else:
        node = node_name or "local"
        node_path.write_text(node + "\n", encoding="utf-8")

    warnings: list[str] = []
    store = Store(rootp, node, warnings)

    for desc_dir in sorted((rootp / "descriptions").iterdir()) if (rootp / "descriptions").exists() else []:
        if not desc_dir.is_dir():
            continue
        versions = []
        for f in desc_dir.iterdir():
            if f.suffix == ".json" and f.stem.isdigit():
                versions.append(int(f.stem))
        if versions:
            store._versions[desc_dir.name] = sorted(versions)

    items_dir = rootp / "items"
    for item_dir in sorted(items_dir.iterdir()):
        if not item_dir.is_dir():
            continue
        log = item_dir / "events.jsonl"
        if not log.exists():
            continue
        dropped = _recover_tail(log)
        if dropped:
            warnings.append(f"items/{item_dir.name}/events.jsonl: dropped "
                            f"{dropped} bytes of half-written trailing event")
        first, last = _first_last_lines(log)
        if first is None:
            warnings.append(f"items/{item_dir.name}/events.jsonl: empty log ignored")
            continue
        try:
            first_doc = loads(first.decode("utf-8"))
            last_doc = loads(last.decode("utf-8"))
        except ValueError:
            raise EngineError(CORRUPT, f"items/{item_dir.name}/events.jsonl is not readable",
                              detail={"path": f"items/{item_dir.name}/events.jsonl"})
        payload = first_doc.get("payload", {})
        store._index[item_dir.name] = {"description": payload.get("description", ""),
                                       "kind": payload.get("kind", "item")}
        store._last_seq[item_dir.name] = last_doc.get("seq", 0)

    store.load_agents()
    return store


def _acquire_lock(lock: Path) -> None:
    pid = os.getpid()
    for _ in range(2):
        try:
            fd = os.open(lock, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
            os.write(fd, f"{pid}\n".encode())
            os.close(fd)
            return
        except FileExistsError:
            try:
                holder = int(lock.read_text().strip())
            except (OSError, ValueError):
                holder = None
            if holder is not None and holder != pid and _pid_alive(holder):
                raise EngineError(STORE_FAILURE,
                                  f"store is locked by running process {holder}",
                                  detail={"pid": holder})
            try:
                lock.unlink()  # stale lock from a dead process
            except OSError:
                pass
    raise EngineError(STORE_FAILURE, "could not acquire store lock")


def _pid_alive(pid: int) -> bool:
    try:
        os.kill(pid, 0)
    except ProcessLookupError:
        return False
    except PermissionError:
        return True
    return True


def _recover_tail(path: Path) -> int:
    """Truncate a trailing line that never got its newline; returns the
    number of bytes dropped."""
    size = path.stat().st_size
    if size == 0:
        return 0
    with open(path, "rb+") as f:
        f.seek(-1, os.SEEK_END)
        if f.read(1) == b"\n":
            return 0
        pos = size
        while pos > 0:
            step = min(_TAIL_CHUNK, pos)
            f.seek(pos - step)
            chunk = f.read(step)
            nl = chunk.rfind(b"\n")
            if nl >= 0:
                keep = pos - step + nl + 1
                f.truncate(keep)
                return size - keep
            pos -= step
        f.truncate(0)
        return size


def _first_last_lines(path: Path) -> tuple[bytes | None, bytes | None]:
    lines = path.read_bytes().splitlines()
    lines = [ln for ln in lines if ln]
    if not lines:
        return None, None
    return lines[0], lines[-1]


def _fsync_dir(path: Path) -> None:
    try:
        fd = os.open(path, os.O_RDONLY)
        try:
            os.fsync(fd)
        finally:
            os.close(fd)
    except OSError:
        pass


def _write_durable(path: Path, blob: bytes) -> None:
    try:
        with open(path, "wb") as f:
            f.write(blob)
            f.flush()
            os.fsync(f.fileno())
    except OSError as err:
        raise EngineError(IO_FAILURE, f"write failed: {err}")
