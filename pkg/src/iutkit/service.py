"""REST session service consumed by the browser UI.

Endpoints:
    POST /sessions                {image_id | image_b64, iut_mode?} -> {session_id, turn}
    POST /sessions/{id}/turns     {instruction, evaluate?}          -> turn record
    GET  /sessions                                                   -> [{session_id, turns}]
    GET  /sessions/{id}                                              -> full log
    GET  /sessions/{id}/state                                        -> canonical tree
    GET  /images/{id}                                                -> PNG bytes
    GET  /runs/{id}/report                                           -> report text
"""

from __future__ import annotations

import base64
from pathlib import Path

from fastapi import FastAPI, HTTPException
from fastapi.responses import PlainTextResponse, Response
from pydantic import BaseModel

from .errors import IutError, TransportError
from .model import canonicalize
from .session import Runtime, Session, mock_runtime


class CreateSessionRequest(BaseModel):
    image_id: str | None = None
    image_b64: str | None = None
    iut_mode: str = "on"


class TurnRequest(BaseModel):
    instruction: str
    evaluate: bool = True


def create_app(runtime: Runtime | None = None, sessions_root: Path | str = "sessions", runs_root: Path | str = "bench-out") -> FastAPI:
    runtime = runtime or mock_runtime()
    sessions_root = Path(sessions_root)
    runs_root = Path(runs_root)
    app = FastAPI(title="iutkit session service")
    sessions: dict[str, Session] = {}

    def get_session(session_id: str) -> Session:
        if session_id not in sessions:
            directory = sessions_root / session_id
            if not (directory / "log.jsonl").exists():
                raise HTTPException(404, f"no session {session_id}")
            sessions[session_id] = Session.load(directory, runtime)
        return sessions[session_id]

    @app.post("/sessions")
    def create_session(req: CreateSessionRequest) -> dict:
        try:
            if req.image_b64:
                image = runtime.store.put(base64.b64decode(req.image_b64), 16, 16)
            elif req.image_id:
                image = runtime.store.get(req.image_id)
            else:
                raise HTTPException(422, "image_id or image_b64 required")
            session = Session.create(sessions_root / "pending", image, runtime, iut_mode=req.iut_mode)
        except TransportError as exc:
            raise HTTPException(404, str(exc))
        except IutError as exc:
            raise HTTPException(400, str(exc))
        # Move the log under the generated id.
        target = sessions_root / session.id
        (sessions_root / "pending").rename(target)
        session.directory = target
        sessions[session.id] = session
        return {"session_id": session.id, "turn": session.turns[0].to_dict()}

    @app.post("/sessions/{session_id}/turns")
    def post_turn(session_id: str, req: TurnRequest) -> dict:
        session = get_session(session_id)
        turn = session.run_turn(req.instruction)
        if req.evaluate and turn.status == "ok" and turn.generated_image_ids:
            try:
                session.evaluate_turn(turn)
            except IutError:
                pass  # an unevaluated turn is not a failed turn
        return turn.to_dict()

    @app.get("/sessions")
    def list_sessions() -> list[dict]:
        known = dict(sessions)
        if sessions_root.exists():
            for directory in sessions_root.iterdir():
                if directory.name not in known and (directory / "log.jsonl").exists():
                    known[directory.name] = Session.load(directory, runtime)
        return [{"session_id": sid, "turns": len(s.turns)} for sid, s in sorted(known.items())]

    @app.get("/sessions/{session_id}")
    def session_log(session_id: str) -> dict:
        session = get_session(session_id)
        return {
            "session_id": session.id,
            "iut_mode": session.iut_mode,
            "turns": [t.to_dict() for t in session.turns],
        }

    @app.get("/sessions/{session_id}/state")
    def session_state(session_id: str) -> Response:
        session = get_session(session_id)
        if session.state is None:
            raise HTTPException(409, "session has no state")
        return Response(canonicalize(session.state.tree), media_type="application/json")

    @app.get("/images/{image_id}")
    def image_bytes(image_id: str) -> Response:
        try:
            data = runtime.store.read_bytes(image_id)
        except TransportError as exc:
            raise HTTPException(404, str(exc))
        return Response(data, media_type="image/png")

    @app.get("/runs/{run_id}/report")
    def run_report(run_id: str) -> PlainTextResponse:
        path = runs_root / run_id / "report.txt"
        if not path.exists():
            raise HTTPException(404, f"no report for run {run_id}")
        return PlainTextResponse(path.read_text("utf-8"))

    return app
