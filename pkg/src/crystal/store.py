"""Disk-backed registry of graphs, audit logs, review queues, and rulesets.

Layout under the data directory:

    graphs/{graph_id}.json   checksummed canonical snapshot
    audit/{graph_id}.log     one canonical JSON record per line, fsynced
    reviews/{graph_id}.json  review items plus the prune-scan counter
    rules/{graph_id}.json    rules attached to the graph, if any

The audit log is the source of truth for history; the snapshot is the source
of truth for current state, and replay must reproduce it byte for byte.
"""

from __future__ import annotations

import json
import os
import threading
from pathlib import Path

from .canonical import canonical_dumps, unwrap_graph_file, wrap_graph_file
from .consolidation import ReviewItem
from .engine import Engine
from .errors import CorruptRecord, NotFound, SequenceGap, ValidationFailed
from .evolution import AuditRecord, apply_audit_record
from .graph import CanvasGraph, EngineConfig
from .rules import RuleSet


def save_graph_file(path: str | Path, graph: CanvasGraph, config: EngineConfig) -> None:
    payload = wrap_graph_file(graph.to_dict(), config.to_dict())
    Path(path).write_text(canonical_dumps(payload) + "\n", encoding="utf-8")


def load_graph_file(path: str | Path) -> tuple[CanvasGraph, EngineConfig]:
    raw = json.loads(Path(path).read_text(encoding="utf-8"))
    graph_payload, config_payload = unwrap_graph_file(raw)
    graph = CanvasGraph.from_dict(graph_payload)
    report = graph.validate()
    if not report.is_empty:
        raise ValidationFailed(report.describe())
    return graph, EngineConfig.from_dict(config_payload)


def parse_audit_line(line: str, seq_hint: int) -> AuditRecord:
    try:
        raw = json.loads(line)
    except json.JSONDecodeError as err:
        raise CorruptRecord(seq_hint, f"not valid JSON: {err}") from None
    try:
        return AuditRecord.from_dict(raw)
    except (KeyError, TypeError, ValueError) as err:
        raise CorruptRecord(seq_hint, f"missing or malformed field: {err}") from None


def read_audit_log(path: str | Path) -> list[AuditRecord]:
    """Parse a full log, insisting on gapless 1-based sequence numbers."""
    records: list[AuditRecord] = []
    expected = 1
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            record = parse_audit_line(line, expected)
            if record.seq != expected:
                raise SequenceGap(expected, record.seq)
            records.append(record)
            expected += 1
    return records


def replay_audit(records: list[AuditRecord], up_to_seq: int | None = None) -> CanvasGraph:
    """Fold the log into a graph, starting from nothing. Rejected attempts
    are part of the history but had no effect, so they are skipped."""
    graph = CanvasGraph()
    for record in records:
        if up_to_seq is not None and record.seq > up_to_seq:
            break
        if not record.applied:
            continue
        graph = apply_audit_record(graph, record)
    return graph


class GraphStore:
    """Owns the data directory and one engine per graph. Engines are loaded
    lazily and kept for the lifetime of the store."""

    def __init__(self, data_dir: str | Path):
        self.data_dir = Path(data_dir)
        for sub in ("graphs", "audit", "reviews", "rules"):
            (self.data_dir / sub).mkdir(parents=True, exist_ok=True)
        self._engines: dict[str, Engine] = {}
        self._rulesets: dict[str, RuleSet] = {}
        self._lock = threading.Lock()

    # -- paths ------------------------------------------------------------

    def graph_path(self, graph_id: str) -> Path:
        return self.data_dir / "graphs" / f"{graph_id}.json"

    def audit_path(self, graph_id: str) -> Path:
        return self.data_dir / "audit" / f"{graph_id}.log"

    def reviews_path(self, graph_id: str) -> Path:
        return self.data_dir / "reviews" / f"{graph_id}.json"

    def rules_path(self, graph_id: str) -> Path:
        return self.data_dir / "rules" / f"{graph_id}.json"

    # -- persistence hooks ----------------------------------------------------

    def _append_audit(self, record: AuditRecord) -> None:
        path = self.audit_path(record.graph_id)
        line = canonical_dumps(record.to_dict()) + "\n"
        with open(path, "a", encoding="utf-8") as fh:
            fh.write(line)
            fh.flush()
            os.fsync(fh.fileno())
        engine = self._engines.get(record.graph_id)
        if engine is not None:
            self._save_state(engine)

    def _save_state(self, engine: Engine) -> None:
        save_graph_file(self.graph_path(engine.graph.graph_id), engine.graph, engine.config)
        payload = {
            "items": [item.to_dict() for item in engine.reviews.values()],
            "prune_scan_count": engine.prune_scan_count,
        }
        self.reviews_path(engine.graph.graph_id).write_text(
            canonical_dumps(payload) + "\n", encoding="utf-8"
        )

    def save_reviews(self, graph_id: str) -> None:
        engine = self.get_engine(graph_id)
        self._save_state(engine)

    # -- lifecycle -----------------------------------------------------------

    def adopt(
        self,
        graph: CanvasGraph,
        config: EngineConfig,
        review_specs: list[dict] | None = None,
        ruleset: RuleSet | None = None,
    ) -> Engine:
        """Take ownership of a freshly built graph: seed its audit log with
        the snapshot record and persist everything."""
        with self._lock:
            graph_id = graph.graph_id
            if self.audit_path(graph_id).exists():
                self.audit_path(graph_id).unlink()
            engine = Engine.create(
                graph, config, audit_sink=self._append_audit, review_specs=review_specs
            )
            self._engines[graph_id] = engine
            if ruleset is not None:
                self.attach_rules(graph_id, ruleset)
            self._save_state(engine)
            return engine

    def get_engine(self, graph_id: str) -> Engine:
        with self._lock:
            engine = self._engines.get(graph_id)
            if engine is not None:
                return engine
            path = self.graph_path(graph_id)
            if not path.exists():
                raise NotFound(graph_id)
            graph, config = load_graph_file(path)
            records: list[AuditRecord] = []
            if self.audit_path(graph_id).exists():
                records = read_audit_log(self.audit_path(graph_id))
            reviews = []
            prune_scan_count = 0
            if self.reviews_path(graph_id).exists():
                raw = json.loads(self.reviews_path(graph_id).read_text(encoding="utf-8"))
                reviews = [ReviewItem.from_dict(item) for item in raw.get("items", [])]
                prune_scan_count = int(raw.get("prune_scan_count", 0))
            engine = Engine.resume(
                graph,
                config,
                records,
                reviews,
                prune_scan_count,
                audit_sink=self._append_audit,
            )
            self._engines[graph_id] = engine
            return engine

    def list_graph_ids(self) -> list[str]:
        with self._lock:
            on_disk = {p.stem for p in (self.data_dir / "graphs").glob("*.json")}
            return sorted(on_disk | set(self._engines))

    # -- rules -------------------------------------------------------------

    def attach_rules(self, graph_id: str, ruleset: RuleSet) -> None:
        self._rulesets[graph_id] = ruleset
        payload = {"rules": ruleset.to_dicts()}
        self.rules_path(graph_id).write_text(canonical_dumps(payload) + "\n", encoding="utf-8")

    def rules_for(self, graph_id: str) -> RuleSet:
        ruleset = self._rulesets.get(graph_id)
        if ruleset is not None:
            return ruleset
        path = self.rules_path(graph_id)
        if path.exists():
            raw = json.loads(path.read_text(encoding="utf-8"))
            ruleset = RuleSet.from_dicts(raw.get("rules", []))
        else:
            ruleset = RuleSet(rules=[])
        self._rulesets[graph_id] = ruleset
        return ruleset

    # -- audit access -----------------------------------------------------------

    def audit_records(self, graph_id: str, from_seq: int = 1) -> list[AuditRecord]:
        engine = self.get_engine(graph_id)
        return [r for r in engine.records if r.seq >= from_seq]
