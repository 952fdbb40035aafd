"""ddflow: an event-sourced workflow engine driven by versioned
descriptions, with live instance migration and provenance export."""

from .engine import Engine, description_item_id
from .errors import EngineError
from .migration import MigrationPlan, check_migration, diff_versions
from .model import Item, ItemDescription, apply_event, fold_events, parse_bundle
from .provenance import Event, export_prov, query_events
from .schema import parse_schema, validate_outcome
from .scripting import exec_consequence, eval_guard, parse_script
from .store import Agent, Store, open_store
from .workflow import (Marking, SoundnessReport, WorkflowDef, check_soundness,
                       initial_marking, validate_graph)

__version__ = "0.1.0"

__all__ = [
    "Agent", "Engine", "EngineError", "Event", "Item", "ItemDescription",
    "Marking", "MigrationPlan", "SoundnessReport", "Store", "WorkflowDef",
    "apply_event", "check_migration", "check_soundness", "description_item_id",
    "diff_versions", "eval_guard", "exec_consequence", "export_prov",
    "fold_events", "initial_marking", "open_store", "parse_bundle",
    "parse_schema", "parse_script", "query_events", "validate_graph",
    "validate_outcome", "__version__",
]
