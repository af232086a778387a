"""HTTP review API.

JSON transport for the dashboard and other clients: session state, the
dependency graph, document and lineage reads, plus the two mutations
(invoke, review). Mutations go through the session's single-writer lock;
reads serve a refreshed snapshot. Every response carries schema_version.
"""

from __future__ import annotations

import json
from pathlib import Path

from fastapi import FastAPI, HTTPException, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse
from pydantic import BaseModel

from . import errors as E
from .graph import export_graph
from .session import Decision, Session

SCHEMA_VERSION = 1


class InvokeBody(BaseModel):
    stage: str


class ReviewBody(BaseModel):
    decision: str
    feedback: str | None = None


def _session_payload(session: Session) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "stages": session.status_rows(),
        "pending_review": (
            session.pending_review.as_dict() if session.pending_review else None
        ),
        "next_stage": session.next_stage(),
        "recommended_order": session.recommended(),
    }


def create_app(session: Session, ui_dir: Path | None = None) -> FastAPI:
    app = FastAPI(title="labflow review API", version="0.1.0")

    @app.exception_handler(E.LabflowError)
    async def _labflow_error(request: Request, exc: E.LabflowError):
        if isinstance(exc, (E.ReviewPending, E.NoPendingReview, E.GateBlocksApproval)):
            status = 409
        elif isinstance(
            exc,
            (
                E.UnknownStage,
                E.UnknownNode,
                E.NotRegistered,
                E.DocumentNotFound,
                E.NoSuchVersion,
            ),
        ):
            status = 404
        elif isinstance(exc, (E.EmptyFeedback,)):
            status = 422
        else:
            status = 500
        return JSONResponse(
            status_code=status,
            content={
                "schema_version": SCHEMA_VERSION,
                "error": type(exc).__name__,
                "detail": str(exc),
            },
        )

    @app.exception_handler(RequestValidationError)
    async def _invalid_body(request: Request, exc: RequestValidationError):
        return JSONResponse(
            status_code=422,
            content={
                "schema_version": SCHEMA_VERSION,
                "error": "InvalidBody",
                "detail": str(exc.errors()),
            },
        )

    @app.exception_handler(HTTPException)
    async def _http_error(request: Request, exc: HTTPException):
        return JSONResponse(
            status_code=exc.status_code,
            content={
                "schema_version": SCHEMA_VERSION,
                "error": "HttpError",
                "detail": exc.detail,
            },
        )

    @app.get("/session")
    def get_session() -> dict:
        session.refresh()
        return _session_payload(session)

    @app.get("/graph")
    def get_graph() -> dict:
        session.refresh()
        payload = json.loads(export_graph(session.graph_view(), "json"))
        payload["schema_version"] = SCHEMA_VERSION
        return payload

    @app.get("/docs/{doc_path:path}")
    def get_document(doc_path: str, version: int | None = None) -> dict:
        session.refresh()
        store = session.project.context_store
        full_path = doc_path if doc_path.startswith("docs/") else f"docs/{doc_path}"
        content = store.read_document(full_path, version)
        head = store.head(full_path)
        shown = version if version is not None else head.version
        return {
            "schema_version": SCHEMA_VERSION,
            "path": full_path,
            "version": shown,
            "head_version": head.version,
            "content": content,
            "refs": [r.as_dict() for r in head.refs],
        }

    @app.get("/lineage/{artifact_path:path}")
    def get_lineage(artifact_path: str) -> dict:
        session.refresh()
        trace = session.project.data_store.lineage(artifact_path)
        return {
            "schema_version": SCHEMA_VERSION,
            "root": trace.root,
            "nodes": trace.nodes,
            "edges": [
                {"child": c, "parent": p, "transformation_ref": ref}
                for c, p, ref in trace.edges
            ],
        }

    @app.get("/events")
    def get_events(since: int = 0) -> dict:
        session.refresh()
        return {
            "schema_version": SCHEMA_VERSION,
            "events": [e.as_dict() for e in session.events if e.seq > since],
            "head_seq": len(session.events),
        }

    @app.post("/invoke")
    def post_invoke(body: InvokeBody) -> dict:
        bundle = session.invoke(body.stage)
        return {
            "schema_version": SCHEMA_VERSION,
            "bundle": bundle.as_dict(),
            "stages": session.status_rows(),
        }

    @app.post("/review")
    def post_review(body: ReviewBody) -> dict:
        try:
            decision = Decision(body.decision)
        except ValueError:
            raise HTTPException(
                status_code=422, detail=f"unknown decision {body.decision!r}"
            ) from None
        next_stage = session.submit_review(decision, feedback=body.feedback)
        return {
            "schema_version": SCHEMA_VERSION,
            "next_stage": next_stage,
            "stages": session.status_rows(),
        }

    if ui_dir is not None and Path(ui_dir).is_dir():
        from fastapi.staticfiles import StaticFiles

        app.mount("/ui", StaticFiles(directory=str(ui_dir), html=True), name="ui")

    return app
