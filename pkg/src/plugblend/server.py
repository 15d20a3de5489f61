"""Session API: plan, generate, patch sketches, regenerate single lines.

Sessions live in memory; mutations on one session are serialized behind a
per-session lock and bump a revision counter, so clients can mark lines
generated under an older revision as stale. With a persist directory,
sessions snapshot to JSON after every mutation and are restored on startup
(story diagnostics beyond text/ppl are not round-tripped).
"""

from __future__ import annotations

import json
import logging
import threading
import uuid
from dataclasses import dataclass, field
from pathlib import Path

from fastapi import FastAPI, Request
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse, StreamingResponse

from .core import ControlConfig
from .errors import InvalidSketch, ProviderUnavailable
from .planning import LinePlan, SketchSet, compile_plan
from .providers import BaseProvider, GuideProvider, attach_check
from .story import (
    PipelineParams,
    Story,
    StoryGenerationError,
    StoryLine,
    generate_story,
    regenerate_line,
    stream_story,
)

log = logging.getLogger(__name__)


@dataclass
class Session:
    id: str
    sketch: SketchSet
    plan: LinePlan
    story: Story | None = None
    revision: int = 0
    line_revisions: list[int] = field(default_factory=list)
    lock: threading.Lock = field(default_factory=threading.Lock)
    generating: bool = False

    def state_jsonable(self) -> dict:
        return {
            "id": self.id,
            "revision": self.revision,
            "sketch": self.sketch.to_jsonable(),
            "plan": self.plan.to_jsonable(),
            "curves": {c: [float(x) for x in v] for c, v in self.plan.curves.items()},
            "story": self.story.to_jsonable() if self.story else None,
            "line_revisions": list(self.line_revisions),
        }


def _story_from_snapshot(payload: dict, plan: LinePlan, params: PipelineParams) -> Story:
    lines = []
    for item in payload.get("lines", []):
        lines.append(
            StoryLine(
                index=int(item["n"]),
                text=str(item["text"]),
                config=ControlConfig.from_jsonable(item.get("config", {})),
                base_perplexity=item.get("ppl"),
                used_fallback=bool(item.get("used_fallback", False)),
                degenerate=bool(item.get("degenerate", False)),
            )
        )
    return Story(tuple(lines), plan, params)


class SessionStore:
    def __init__(
        self,
        base: BaseProvider,
        guide: GuideProvider | None,
        params: PipelineParams | None = None,
        persist_dir: str | Path | None = None,
    ):
        attach_check(base, guide)
        self.base = base
        self.guide = guide
        self.params = params or PipelineParams()
        self.persist_dir = Path(persist_dir) if persist_dir else None
        self.sessions: dict[str, Session] = {}
        self._map_lock = threading.Lock()
        if self.persist_dir:
            self.persist_dir.mkdir(parents=True, exist_ok=True)
            self._restore()

    def _restore(self) -> None:
        for path in sorted(self.persist_dir.glob("*.json")):
            try:
                payload = json.loads(path.read_text())
                sketch = SketchSet.from_jsonable(payload["sketch"], where=str(path))
                plan = compile_plan(sketch)
                session = Session(
                    id=payload["id"],
                    sketch=sketch,
                    plan=plan,
                    revision=int(payload.get("revision", 0)),
                    line_revisions=[int(r) for r in payload.get("line_revisions", [])],
                )
                if payload.get("story"):
                    session.story = _story_from_snapshot(payload["story"], plan, self.params)
                self.sessions[session.id] = session
            except (KeyError, ValueError, InvalidSketch) as exc:
                log.warning("skipping unreadable session snapshot %s: %s", path, exc)

    def snapshot(self, session: Session) -> None:
        if not self.persist_dir:
            return
        path = self.persist_dir / f"{session.id}.json"
        path.write_text(json.dumps(session.state_jsonable()))

    def create(self, sketch: SketchSet) -> Session:
        session = Session(id=uuid.uuid4().hex, sketch=sketch, plan=compile_plan(sketch))
        with self._map_lock:
            self.sessions[session.id] = session
        self.snapshot(session)
        return session

    def get(self, session_id: str) -> Session | None:
        return self.sessions.get(session_id)


def _error(status: int, message: str, **extra) -> JSONResponse:
    return JSONResponse({"error": message, **extra}, status_code=status)


def create_app(
    base: BaseProvider,
    guide: GuideProvider | None,
    params: PipelineParams | None = None,
    persist_dir: str | Path | None = None,
) -> FastAPI:
    app = FastAPI(title="plugblend session API")
    app.add_middleware(
        CORSMiddleware,
        allow_origins=["*"],
        allow_methods=["*"],
        allow_headers=["*"],
    )
    store = SessionStore(base, guide, params, persist_dir)
    app.state.store = store

    @app.get("/api/topics")
    def topics():
        if store.guide is None:
            return {"codes": []}
        try:
            return {"codes": list(store.guide.codes)}
        except ProviderUnavailable as exc:
            return _error(502, str(exc))

    @app.post("/api/session")
    async def create_session(request: Request):
        try:
            payload = await request.json()
        except json.JSONDecodeError:
            return _error(400, "body must be a JSON sketch set")
        try:
            sketch = SketchSet.from_jsonable(payload, where="request body")
        except InvalidSketch as exc:
            return _error(400, str(exc))
        session = store.create(sketch)
        return session.state_jsonable()

    @app.get("/api/session/{session_id}")
    def get_session(session_id: str):
        session = store.get(session_id)
        if session is None:
            return _error(404, f"unknown session {session_id!r}")
        return session.state_jsonable()

    @app.patch("/api/session/{session_id}/sketch")
    async def patch_sketch(session_id: str, request: Request):
        session = store.get(session_id)
        if session is None:
            return _error(404, f"unknown session {session_id!r}")
        try:
            payload = await request.json()
        except json.JSONDecodeError:
            return _error(400, "body must be a JSON sketch set")
        try:
            sketch = SketchSet.from_jsonable(payload, where="request body")
        except InvalidSketch as exc:
            return _error(400, str(exc))
        with session.lock:
            session.sketch = sketch
            session.plan = compile_plan(sketch)
            session.revision += 1
            store.snapshot(session)
        return session.state_jsonable()

    @app.post("/api/session/{session_id}/generate")
    def generate(session_id: str, stream: bool = False):
        session = store.get(session_id)
        if session is None:
            return _error(404, f"unknown session {session_id!r}")
        if stream:
            return StreamingResponse(
                _generate_stream(store, session), media_type="application/x-ndjson"
            )
        with session.lock:
            session.generating = True
            try:
                story = generate_story(session.plan, store.base, store.guide, store.params)
            except StoryGenerationError as exc:
                return _error(502, str(exc), partial=exc.partial.to_jsonable())
            finally:
                session.generating = False
            session.story = story
            session.revision += 1
            session.line_revisions = [session.revision] * story.n_lines
            store.snapshot(session)
        return session.state_jsonable()

    def _generate_stream(store: SessionStore, session: Session):
        with session.lock:
            session.generating = True
            lines = []
            try:
                for line in stream_story(session.plan, store.base, store.guide, store.params):
                    lines.append(line)
                    yield json.dumps(line.to_jsonable()) + "\n"
                session.story = Story(tuple(lines), session.plan, store.params)
                session.revision += 1
                session.line_revisions = [session.revision] * session.story.n_lines
                store.snapshot(session)
                yield json.dumps({"done": True, "revision": session.revision}) + "\n"
            except StoryGenerationError as exc:
                yield json.dumps({"error": str(exc)}) + "\n"
            finally:
                session.generating = False

    @app.post("/api/session/{session_id}/line/{n}/regenerate")
    def regenerate(session_id: str, n: int):
        session = store.get(session_id)
        if session is None:
            return _error(404, f"unknown session {session_id!r}")
        if session.generating:
            return _error(409, "a full generation is in progress")
        if session.story is None:
            return _error(400, "no story generated yet")
        if not 0 <= n < session.story.n_lines:
            return _error(400, f"line {n} outside [0, {session.story.n_lines})")
        with session.lock:
            try:
                session.story = regenerate_line(
                    session.story, n, session.plan, store.base, store.guide, store.params
                )
            except ProviderUnavailable as exc:
                return _error(502, str(exc))
            session.revision += 1
            session.line_revisions[n] = session.revision
            store.snapshot(session)
        return session.state_jsonable()

    return app
