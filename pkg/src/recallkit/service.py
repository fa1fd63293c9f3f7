"""HTTP session service exposing the scheduler to interactive clients.

Single process, in-memory stores, optional JSON snapshot persistence so a
restarted service resumes its sessions. All timestamps are server
assigned: the clock is injected here and nowhere else, so scheduler and
model code stay fully clock-controlled in tests.
"""

from __future__ import annotations

import json
import threading
import time
import uuid
from pathlib import Path
from typing import Callable, Mapping

from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse
from fastapi.staticfiles import StaticFiles

from .domain import Deck, Direction, FormatKind, QuestionFormat
from .params import (
    REFERENCE_MLR_PARAMS,
    REFERENCE_RPL_PARAMS,
    MLRParams,
    ParamsError,
    RPLParams,
    load_params,
)
from .scheduler import (
    Question,
    SessionProtocolError,
    StudySession,
    grade_typed_answer,
)


class ApiError(Exception):
    def __init__(self, status: int, message: str, field: str | None = None) -> None:
        super().__init__(message)
        self.status = status
        self.message = message
        self.field = field


def _question_view(question: Question | None) -> dict | None:
    if question is None:
        return None
    view = question.to_json_dict()
    # Never ship the expected answer with an unanswered typed or choice
    # question; self-graded cards legitimately reveal it client-side.
    if question.format.kind is not FormatKind.SELF_GRADED:
        view.pop("answer")
    return view


def _session_view(session: StudySession, now: int, last_answer: dict | None = None) -> dict:
    progress = session.progress(now)
    view = {
        "session_id": session.session_id,
        "deck_id": session.deck.deck_id,
        "deck_size": len(session.deck.items),
        "model": session.model_kind,
        "direction": session.direction.value,
        "mastery_threshold": session.mastery_threshold,
        "complete": progress.complete,
        "current_question": _question_view(session.outstanding),
        "items": [
            {
                "kc_id": item.kc_id,
                "predicted_recall": item.predicted,
                "cold_start": item.cold_start,
            }
            for item in progress.items
        ],
        "progress": {
            "mastered": progress.mastered,
            "total": len(progress.items),
            "mean_predicted": progress.mean_predicted,
            "answers": len(session.answer_log),
        },
    }
    if last_answer is not None:
        view["last_answer"] = last_answer
    return view


class ServiceState:
    """Decks, sessions, locks, and optional snapshot persistence."""

    def __init__(
        self,
        clock: Callable[[], int] | None = None,
        snapshot_dir: str | Path | None = None,
    ) -> None:
        self._clock_source = clock or (lambda: int(time.time()))
        self._clock_lock = threading.Lock()
        self._last_now = 0
        self.snapshot_dir = Path(snapshot_dir) if snapshot_dir else None
        self.decks: dict[str, Deck] = {}
        self.sessions: dict[str, StudySession] = {}
        self.session_locks: dict[str, threading.Lock] = {}
        self.registry_lock = threading.Lock()
        if self.snapshot_dir:
            self.snapshot_dir.mkdir(parents=True, exist_ok=True)
            self._restore()

    def clock(self) -> int:
        """Server time, pinned non-decreasing: model preconditions require
        that a session's trials never move backwards even if the wall
        clock does."""
        with self._clock_lock:
            now = max(int(self._clock_source()), self._last_now)
            self._last_now = now
            return now

    def _restore(self) -> None:
        assert self.snapshot_dir is not None
        for path in sorted(self.snapshot_dir.glob("deck-*.json")):
            deck = Deck.from_json_dict(json.loads(path.read_text()))
            self.decks[deck.deck_id] = deck
        for path in sorted(self.snapshot_dir.glob("session-*.json")):
            session = StudySession.from_json(path.read_text())
            self.sessions[session.session_id] = session
            self.session_locks[session.session_id] = threading.Lock()

    def save_deck(self, deck: Deck) -> None:
        if self.snapshot_dir:
            path = self.snapshot_dir / f"deck-{deck.deck_id}.json"
            path.write_text(json.dumps(deck.to_json_dict(), indent=2))

    def save_session(self, session: StudySession) -> None:
        if self.snapshot_dir:
            path = self.snapshot_dir / f"session-{session.session_id}.json"
            path.write_text(session.to_json())

    def session(self, session_id: str) -> tuple[StudySession, threading.Lock]:
        try:
            return self.sessions[session_id], self.session_locks[session_id]
        except KeyError:
            raise ApiError(404, f"unknown session {session_id!r}") from None


def _resolve_params(
    model: str, params_ref: str | None
) -> MLRParams | RPLParams:
    if params_ref in (None, "", "default"):
        return REFERENCE_MLR_PARAMS if model == "mlr" else REFERENCE_RPL_PARAMS
    path = Path(params_ref)
    if not path.exists():
        raise ApiError(400, f"params_ref {params_ref!r} does not name a file", "params_ref")
    try:
        return load_params(path, model)
    except ParamsError as exc:
        raise ApiError(400, str(exc), "params_ref") from exc


def _parse_answer_format(body: Mapping) -> QuestionFormat:
    kind = FormatKind(body["format"])
    options = body.get("options_count")
    return QuestionFormat(kind, int(options) if options is not None else None)


def create_app(
    clock: Callable[[], int] | None = None,
    snapshot_dir: str | Path | None = None,
    static_dir: str | Path | None = None,
) -> FastAPI:
    """Build the session service.

    clock returns integer epoch seconds; inject a fake in tests.
    snapshot_dir enables crash-safe JSON persistence of decks and
    sessions. static_dir, when given, serves the study UI bundle at /ui.
    """
    app = FastAPI(title="recallkit session service")
    state = ServiceState(clock=clock, snapshot_dir=snapshot_dir)
    app.state.service = state

    @app.exception_handler(ApiError)
    def _api_error(_request: Request, exc: ApiError) -> JSONResponse:
        body = {"error": exc.message}
        if exc.field:
            body["field"] = exc.field
        return JSONResponse(status_code=exc.status, content=body)

    @app.exception_handler(RequestValidationError)
    def _validation_error(_request: Request, exc: RequestValidationError) -> JSONResponse:
        first = exc.errors()[0] if exc.errors() else {}
        loc = ".".join(str(p) for p in first.get("loc", ()) if p != "body")
        return JSONResponse(
            status_code=400,
            content={"error": f"malformed request: {first.get('msg', 'invalid body')}", "field": loc or None},
        )

    def _json_body(request_body: Mapping | None, *required: str) -> Mapping:
        if not isinstance(request_body, Mapping):
            raise ApiError(400, "request body must be a JSON object")
        for name in required:
            if name not in request_body:
                raise ApiError(400, f"missing field {name!r}", name)
        return request_body

    @app.post("/decks")
    def create_deck(body: dict) -> dict:
        data = _json_body(body, "items")
        deck_id = str(data.get("deck_id") or uuid.uuid4().hex[:12])
        try:
            deck = Deck.from_json_dict({"deck_id": deck_id, "items": data["items"]})
        except (ValueError, TypeError) as exc:
            raise ApiError(400, f"invalid deck: {exc}", "items") from exc
        with state.registry_lock:
            if deck_id in state.decks:
                raise ApiError(409, f"deck {deck_id!r} already exists", "deck_id")
            state.decks[deck_id] = deck
        state.save_deck(deck)
        return {"deck_id": deck_id, "size": len(deck.items)}

    @app.get("/decks")
    def list_decks() -> dict:
        with state.registry_lock:
            return {
                "decks": [
                    {"deck_id": d.deck_id, "size": len(d.items)}
                    for d in state.decks.values()
                ]
            }

    @app.get("/decks/{deck_id}")
    def get_deck(deck_id: str) -> dict:
        deck = state.decks.get(deck_id)
        if deck is None:
            raise ApiError(404, f"unknown deck {deck_id!r}")
        return deck.to_json_dict()

    @app.post("/sessions")
    def create_session(body: dict) -> dict:
        data = _json_body(body, "deck_id")
        deck = state.decks.get(str(data["deck_id"]))
        if deck is None:
            raise ApiError(404, f"unknown deck {data['deck_id']!r}", "deck_id")
        model = str(data.get("model", "rpl"))
        if model not in ("mlr", "rpl"):
            raise ApiError(400, f"model must be 'mlr' or 'rpl', got {model!r}", "model")
        try:
            direction = Direction(str(data.get("direction_policy", "forward")))
        except ValueError as exc:
            raise ApiError(400, str(exc), "direction_policy") from exc
        params = _resolve_params(model, data.get("params_ref"))
        session_id = uuid.uuid4().hex[:12]
        try:
            session = StudySession(
                session_id=session_id,
                deck=deck,
                model_kind=model,
                params=params,
                direction=direction,
                format_policy=str(data.get("format_policy", "adaptive")),
                mastery_threshold=float(data.get("mastery_threshold", 0.9)),
                case_insensitive=bool(data.get("case_insensitive", False)),
                seed=int(data.get("seed", 0)),
            )
        except (ValueError, TypeError) as exc:
            raise ApiError(400, str(exc)) from exc
        with state.registry_lock:
            state.sessions[session_id] = session
            state.session_locks[session_id] = threading.Lock()
        state.save_session(session)
        return _session_view(session, state.clock())

    @app.get("/sessions/{session_id}")
    def get_session(session_id: str) -> dict:
        session, lock = state.session(session_id)
        with lock:
            return _session_view(session, state.clock())

    @app.get("/sessions/{session_id}/next")
    def next_question(session_id: str) -> dict:
        session, lock = state.session(session_id)
        with lock:
            question = session.next_question(state.clock())
            state.save_session(session)
            if question is None:
                return {"complete": True}
            return {"complete": False, "question": _question_view(question)}

    @app.post("/sessions/{session_id}/answers")
    def answer(session_id: str, body: dict) -> dict:
        session, lock = state.session(session_id)
        data = _json_body(body, "kc_id", "direction", "format")
        with lock:
            question = session.outstanding
            if question is None:
                raise ApiError(409, "no outstanding question to answer")
            try:
                direction = Direction(str(data["direction"]))
                fmt = _parse_answer_format(data)
            except ValueError as exc:
                raise ApiError(400, str(exc), "direction") from exc
            if "correct" in data:
                correct = bool(data["correct"])
            elif "typed_answer" in data:
                correct = grade_typed_answer(
                    question.answer,
                    str(data["typed_answer"]),
                    session.case_insensitive,
                )
            else:
                raise ApiError(400, "answer needs either 'correct' or 'typed_answer'", "correct")
            now = state.clock()
            try:
                session.record_answer(data["kc_id"], direction, fmt, correct, now)
            except SessionProtocolError as exc:
                raise ApiError(409, str(exc)) from exc
            state.save_session(session)
            return _session_view(
                session,
                now,
                last_answer={
                    "kc_id": question.kc_id,
                    "correct": correct,
                    "expected_answer": question.answer,
                },
            )

    @app.get("/sessions/{session_id}/progress")
    def progress(session_id: str) -> dict:
        session, lock = state.session(session_id)
        with lock:
            return session.progress(state.clock()).to_json_dict()

    if static_dir is not None:
        app.mount("/ui", StaticFiles(directory=str(static_dir), html=True), name="ui")

    return app
