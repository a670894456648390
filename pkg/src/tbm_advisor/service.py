"""HTTP+JSON advisory service bridging the engine and the dashboard.

Stateless compute endpoints are pure functions of their body; simulator
sessions are the only mutable state and each one serializes its steps
(concurrent steps on one session get 409). Live consumers subscribe to a
per-session server-sent-event stream; by default the stream republishes
every applied step, with ``?auto=1`` the server paces the simulator
itself.
"""

from __future__ import annotations

import asyncio
import itertools
import json
from dataclasses import dataclass, field

from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse, StreamingResponse
from pydantic import BaseModel, Field

from . import advisor
from .domain import N_COP, N_CXP, SCHEMA_VERSION, GroundClass
from .errors import AdvisorError, SessionClosedError, UnknownGroundClassError
from .sim import DriveSpec, SegmentSpec, SimSession

DEFAULT_SESSION_SPEC = DriveSpec(
    segments=(SegmentSpec(GroundClass.GC1, 100000),),
    noise_std=0.0,
    seed=0,
)


class RecommendRequest(BaseModel):
    schema_version: int = SCHEMA_VERSION
    ground_class: str
    cop: list[float] = Field(min_length=N_COP, max_length=N_COP)
    cxp: list[float] = Field(min_length=N_CXP, max_length=N_CXP)


class SessionRequest(BaseModel):
    schema_version: int = SCHEMA_VERSION
    seed: int | None = None
    ground_class: str | None = None
    noise_std: float | None = None


class StepRequest(BaseModel):
    schema_version: int = SCHEMA_VERSION
    cop: list[float] = Field(min_length=N_COP, max_length=N_COP)


@dataclass
class _Session:
    sim: SimSession
    busy: bool = False
    subscribers: list = field(default_factory=list)
    closed: bool = False
    last_event: dict | None = None


def _error(status: int, name: str, message: str) -> JSONResponse:
    return JSONResponse(
        status_code=status,
        content={"schema_version": SCHEMA_VERSION, "error": name, "message": message},
    )


def create_app(registry=None, sim_spec: DriveSpec | None = None,
               step_scale: float = advisor.DEFAULT_STEP_SCALE,
               ui_dir=None) -> FastAPI:
    app = FastAPI(title="tbm-advisor", version="0.1.0")
    sessions: dict[str, _Session] = {}
    ids = itertools.count(1)
    base_spec = sim_spec or DEFAULT_SESSION_SPEC
    app.state.sessions = sessions
    if ui_dir is not None:
        from fastapi.staticfiles import StaticFiles

        app.mount("/ui", StaticFiles(directory=str(ui_dir), html=True), name="ui")

    @app.exception_handler(RequestValidationError)
    async def malformed_body(request: Request, exc: RequestValidationError):
        detail = exc.errors()[0] if exc.errors() else {}
        loc = ".".join(str(p) for p in detail.get("loc", ()))
        return _error(400, "MalformedBody", f"{loc}: {detail.get('msg', 'invalid')}")

    @app.exception_handler(AdvisorError)
    async def engine_error(request: Request, exc: AdvisorError):
        status = 404 if isinstance(exc, UnknownGroundClassError) else 422
        return _error(status, type(exc).__name__, str(exc))

    def _require_registry():
        if registry is None:
            raise _ServiceUnavailable()
        return registry

    class _ServiceUnavailable(Exception):
        pass

    @app.exception_handler(_ServiceUnavailable)
    async def not_loaded(request: Request, exc: _ServiceUnavailable):
        return _error(503, "ModelsNotLoaded", "no model registry loaded")

    def _check_schema_version(version: int):
        if version != SCHEMA_VERSION:
            raise _SchemaVersionMismatch(version)

    class _SchemaVersionMismatch(Exception):
        def __init__(self, got):
            self.got = got

    @app.exception_handler(_SchemaVersionMismatch)
    async def schema_mismatch(request: Request, exc: _SchemaVersionMismatch):
        return _error(
            400,
            "SchemaVersionMismatch",
            f"payload schema_version {exc.got} != server {SCHEMA_VERSION}",
        )

    # --- stateless endpoints ---------------------------------------------

    @app.get("/health")
    async def health():
        loaded = [gc.value for gc in registry.ground_classes] if registry else []
        return {
            "schema_version": SCHEMA_VERSION,
            "status": "ok" if loaded else "degraded",
            "models_loaded": loaded,
        }

    @app.get("/models")
    async def models():
        reg = _require_registry()
        return {"schema_version": SCHEMA_VERSION, "models": reg.describe()}

    @app.post("/recommend")
    async def recommend_endpoint(body: RecommendRequest):
        _check_schema_version(body.schema_version)
        reg = _require_registry()
        gc = GroundClass.parse(body.ground_class)
        rec = advisor.recommend(reg, gc, body.cop, body.cxp, step_scale=step_scale)
        return rec.to_dict()

    # --- simulator sessions -------------------------------------------------

    def _session_or_404(session_id: str) -> _Session:
        session = sessions.get(session_id)
        if session is None or session.closed:
            raise _UnknownSession(session_id)
        return session

    class _UnknownSession(Exception):
        def __init__(self, session_id):
            self.session_id = session_id

    @app.exception_handler(_UnknownSession)
    async def unknown_session(request: Request, exc: _UnknownSession):
        return _error(404, "UnknownSession", f"no open session {exc.session_id!r}")

    def _step_payload(session: _Session, record, reg) -> dict:
        rec = advisor.recommend(
            reg, record.ground_class, list(record.cop), list(record.cxp),
            step_scale=step_scale,
        )
        return {
            "schema_version": SCHEMA_VERSION,
            "record": record.to_dict(),
            "recommendation": rec.to_dict(),
        }

    def _publish(session: _Session, payload: dict):
        session.last_event = payload
        for queue in list(session.subscribers):
            queue.put_nowait(payload)

    @app.post("/session")
    async def open_session(body: SessionRequest):
        _check_schema_version(body.schema_version)
        reg = _require_registry()
        spec = base_spec
        overrides = {}
        if body.seed is not None:
            overrides["seed"] = body.seed
        if body.noise_std is not None:
            overrides["noise_std"] = body.noise_std
        if body.ground_class is not None:
            gc = GroundClass.parse(body.ground_class)
            overrides["segments"] = (
                SegmentSpec(gc, sum(s.n_samples for s in spec.segments)),
            )
        if overrides:
            from dataclasses import replace

            spec = replace(spec, **overrides)
        session = _Session(sim=SimSession(spec))
        session_id = f"s{next(ids)}"
        sessions[session_id] = session
        record = session.sim.step()
        payload = _step_payload(session, record, reg)
        _publish(session, payload)
        return {"session_id": session_id, **payload}

    @app.post("/session/{session_id}/step")
    async def step_session(session_id: str, body: StepRequest):
        _check_schema_version(body.schema_version)
        reg = _require_registry()
        session = _session_or_404(session_id)
        if session.busy:
            return _error(409, "StepRace", "a step is already in progress")
        session.busy = True
        try:
            try:
                record = session.sim.step(body.cop)
            except SessionClosedError as err:
                return _error(404, "UnknownSession", str(err))
            payload = _step_payload(session, record, reg)
            _publish(session, payload)
            return payload
        finally:
            session.busy = False

    @app.delete("/session/{session_id}")
    async def close_session(session_id: str):
        session = _session_or_404(session_id)
        session.closed = True
        session.sim.close()
        for queue in list(session.subscribers):
            queue.put_nowait(None)
        return {"schema_version": SCHEMA_VERSION, "closed": session_id}

    @app.get("/session/{session_id}/stream")
    async def stream_session(
        session_id: str, auto: bool = False, interval: float = 1.0, limit: int = 0
    ):
        """Server-sent (record, recommendation) ticks.

        Default mode republishes every applied step (state changes flow
        through POSTs). With ``auto=1`` the server paces the simulator at
        ``interval`` seconds per tick. ``limit`` > 0 closes the stream
        after that many events.
        """
        session = _session_or_404(session_id)
        reg = _require_registry()

        async def change_feed():
            queue: asyncio.Queue = asyncio.Queue()
            session.subscribers.append(queue)
            sent = 0
            try:
                if session.last_event is not None:
                    yield _sse(session.last_event)
                    sent += 1
                while limit <= 0 or sent < limit:
                    payload = await queue.get()
                    if payload is None:
                        break
                    yield _sse(payload)
                    sent += 1
            finally:
                session.subscribers.remove(queue)

        async def auto_feed():
            sent = 0
            while not session.closed and not session.sim.exhausted:
                if limit > 0 and sent >= limit:
                    break
                if session.busy:
                    await asyncio.sleep(interval)
                    continue
                session.busy = True
                try:
                    record = session.sim.step()
                    payload = _step_payload(session, record, reg)
                    _publish(session, payload)
                finally:
                    session.busy = False
                yield _sse(payload)
                sent += 1
                await asyncio.sleep(interval)

        generator = auto_feed() if auto else change_feed()
        return StreamingResponse(generator, media_type="text/event-stream")

    return app


def _sse(payload: dict) -> str:
    return f"event: tick\ndata: {json.dumps(payload, sort_keys=True)}\n\n"
