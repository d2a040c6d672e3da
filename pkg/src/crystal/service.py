"""HTTP surface over the store, engines, and dialogue sessions.

Every mutation goes through an engine and therefore lands in the audit log;
reads serve snapshots. Domain errors map onto a small set of status codes:
400 for malformed input, 404 for unknown ids, 409 for conflicts, and 422 for
payloads that parse but fail validation.
"""

from __future__ import annotations

import os

from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse
from pydantic import BaseModel, Field

from .agents import AgentProfile
from .canonical import wrap_graph_file
from .dialogue import SessionManager, apply_feedback, take_turn
from .errors import (
    AlreadyResolved,
    CrystalError,
    CycleRejected,
    GraphNotPromoted,
    InvalidPayload,
    NotACandidate,
    NotFound,
    PreconditionViolated,
    SessionClosed,
    UnknownEdge,
    UnknownNode,
    UtteranceParseError,
)
from .evolution import Actor, EditOp, Outcome, SYSTEM_ACTOR
from .extraction import CandidateChain
from .graph import EngineConfig
from .merge import merge
from .rules import RuleSet, graft
from .store import GraphStore

NOT_FOUND_ERRORS = (NotFound, UnknownNode, UnknownEdge)
CONFLICT_ERRORS = (
    CycleRejected,
    AlreadyResolved,
    SessionClosed,
    GraphNotPromoted,
    PreconditionViolated,
    NotACandidate,
)
BAD_REQUEST_ERRORS = (UtteranceParseError,)


class CreateGraphRequest(BaseModel):
    chains: list[dict] | None = None
    rules: list[dict] | None = None
    config: dict | None = None


class EditRequest(BaseModel):
    op_kind: str
    payload: dict = Field(default_factory=dict)
    actor: dict | None = None


class ResolveRequest(BaseModel):
    verdict: str
    actor: dict | None = None


class TurnRequest(BaseModel):
    utterance: str


class FeedbackRequest(BaseModel):
    outcome: str
    expert_flag: bool = False


def _actor_from(raw: dict | None) -> Actor:
    if raw is None:
        return Actor(kind="Expert", actor_id="api")
    return Actor.from_dict(raw)


def _error_payload(err: Exception) -> dict:
    payload: dict = {"error": type(err).__name__, "detail": str(err)}
    if isinstance(err, CycleRejected):
        payload["cycle"] = list(err.cycle)
    return payload


def create_app(data_dir: str | None = None) -> FastAPI:
    resolved = os.environ.get("CRYSTAL_DATA_DIR") or data_dir or "./crystal-data"
    store = GraphStore(resolved)
    sessions = SessionManager()
    app = FastAPI(title="crystal reasoning service")
    app.state.store = store
    app.state.sessions = sessions

    @app.exception_handler(CrystalError)
    def handle_domain_error(request: Request, err: CrystalError):
        if isinstance(err, NOT_FOUND_ERRORS):
            status = 404
        elif isinstance(err, CONFLICT_ERRORS):
            status = 409
        elif isinstance(err, BAD_REQUEST_ERRORS):
            status = 400
        else:
            status = 422
        return JSONResponse(status_code=status, content=_error_payload(err))

    @app.exception_handler(RequestValidationError)
    def handle_malformed(request: Request, err: RequestValidationError):
        return JSONResponse(
            status_code=400, content={"error": "MalformedRequest", "detail": str(err)}
        )

    # -- graphs ----------------------------------------------------------

    @app.post("/graphs", status_code=201)
    def create_graph(body: CreateGraphRequest):
        config = EngineConfig.from_dict(body.config) if body.config else EngineConfig()
        if body.rules is not None:
            ruleset = RuleSet.from_dicts(body.rules)
            graph = graft(ruleset)
            engine = store.adopt(graph, config, ruleset=ruleset)
            return {
                "graph_id": engine.graph.graph_id,
                "version": engine.graph.version,
                "promoted": engine.graph.promoted,
                "source": "graft",
                "review_items": [],
            }
        chains = [CandidateChain.from_dict(c) for c in body.chains or []]
        graph, report = merge(chains, config)
        engine = store.adopt(graph, config, review_specs=report.review_items_created)
        return {
            "graph_id": engine.graph.graph_id,
            "version": engine.graph.version,
            "promoted": engine.graph.promoted,
            "source": "merge",
            "report": report.to_dict(),
            "review_items": [i.to_dict() for i in engine.pending_reviews()],
        }

    @app.get("/graphs")
    def list_graphs():
        return {"graph_ids": store.list_graph_ids()}

    @app.get("/graphs/{graph_id}")
    def get_graph(graph_id: str):
        engine = store.get_engine(graph_id)
        return wrap_graph_file(engine.graph.to_dict(), engine.config.to_dict())

    @app.post("/graphs/{graph_id}/edits")
    def post_edit(graph_id: str, body: EditRequest):
        engine = store.get_engine(graph_id)
        op = EditOp.from_dict(
            {
                "op_kind": body.op_kind,
                "payload": body.payload,
                "actor": body.actor or {"kind": "Expert", "id": "api"},
            }
        )
        result = engine.apply_edit(op)
        if result.applied:
            return result.to_dict()
        if result.reason == "CycleRejected":
            return JSONResponse(status_code=409, content=result.to_dict())
        if result.reason in ("UnknownNode", "UnknownEdge", "NotFound"):
            return JSONResponse(status_code=404, content=result.to_dict())
        return JSONResponse(status_code=422, content=result.to_dict())

    # -- reviews ----------------------------------------------------------

    @app.get("/graphs/{graph_id}/reviews")
    def list_reviews(graph_id: str, status: str | None = None):
        engine = store.get_engine(graph_id)
        items = list(engine.reviews.values())
        if status is not None:
            items = [i for i in items if i.status.value == status]
        return {"items": [i.to_dict() for i in items]}

    @app.get("/graphs/{graph_id}/reviews/{item_id}")
    def get_review(graph_id: str, item_id: str):
        engine = store.get_engine(graph_id)
        item = engine.reviews.get(item_id)
        if item is None:
            raise NotFound(item_id)
        return item.to_dict()

    @app.post("/graphs/{graph_id}/reviews/{item_id}")
    def resolve_review(graph_id: str, item_id: str, body: ResolveRequest):
        engine = store.get_engine(graph_id)
        item = engine.resolve_review(item_id, body.verdict, _actor_from(body.actor))
        store.save_reviews(graph_id)
        return {"item": item.to_dict(), "version": engine.graph.version}

    # -- sessions ----------------------------------------------------------

    @app.post("/graphs/{graph_id}/sessions", status_code=201)
    def open_session(graph_id: str):
        engine = store.get_engine(graph_id)
        if engine.explorer is None:
            engine.explorer = AgentProfile(agent_id="explorer")
        session = sessions.open(engine.graph, engine.config, store.rules_for(graph_id))
        return {
            "session_id": session.session_id,
            "graph_id": graph_id,
            "status": session.status.value,
            "current_node": session.current_node_id,
        }

    @app.get("/sessions/{session_id}")
    def get_session(session_id: str):
        return sessions.get(session_id).to_dict()

    @app.post("/sessions/{session_id}/turns")
    def post_turn(session_id: str, body: TurnRequest):
        session = sessions.get(session_id)
        engine = store.get_engine(session.graph_id)
        move = take_turn(session, body.utterance, engine)
        return {
            "move": move.to_dict(),
            "status": session.status.value,
            "current_node": session.current_node_id,
            "pending_question": session.pending_question,
            "visited_edge_ids": list(session.visited_edge_ids),
        }

    @app.post("/sessions/{session_id}/feedback")
    def post_feedback(session_id: str, body: FeedbackRequest):
        session = sessions.get(session_id)
        engine = store.get_engine(session.graph_id)
        try:
            outcome = Outcome(body.outcome)
        except ValueError:
            raise InvalidPayload(f"unknown outcome {body.outcome!r}") from None
        report = apply_feedback(session, engine, outcome, body.expert_flag)
        return {"report": report.to_dict(), "version": engine.graph.version}

    # -- audit and consolidation -----------------------------------------------

    @app.get("/graphs/{graph_id}/audit")
    def get_audit(graph_id: str, from_seq: int = 1):
        records = store.audit_records(graph_id, from_seq)
        return {"records": [r.to_dict() for r in records]}

    @app.post("/graphs/{graph_id}/consolidate")
    def consolidate(graph_id: str):
        engine = store.get_engine(graph_id)
        report = engine.consolidate()
        store.save_reviews(graph_id)
        return report.to_dict()

    return app
