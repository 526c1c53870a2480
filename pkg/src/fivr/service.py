"""HTTP service for annotation sessions and corpus browsing.

All request and response bodies use the field-named record text format
from :mod:`fivr.records` under a versioned ``/v1`` path prefix.  Session
state is durable: every label appends to a per-session event log before
the response goes out, and a restarted service replays the logs to
recover exactly where the annotators left off.  Mutating endpoints
accept a ``request_token`` so retries after a lost response never apply
twice.
"""

from __future__ import annotations

import re
import threading
from pathlib import Path

from fastapi import FastAPI, Request, Response

from . import annotate, index, pipeline, synth
from .ingest import Catalog, format_timestamp, load_catalog
from .records import decode as decode_records
from .records import encode as encode_records

MEDIA_TYPE = "text/plain; charset=utf-8"
RANKING_DEPTH = 100
_SESSION_ID_RE = re.compile(r"^s(\d{4})$")
_KEYFRAME_RE = re.compile(r"^\d{3}\.png$")


class ServiceError(Exception):
    """An HTTP-mappable failure."""

    def __init__(self, status: int, message: str):
        super().__init__(message)
        self.status = status
        self.message = message


def _records_response(records: list[dict], status: int = 200) -> Response:
    return Response(
        content=encode_records(records), status_code=status, media_type=MEDIA_TYPE
    )


def _error_response(status: int, message: str) -> Response:
    return _records_response([{"error": message}], status=status)


def _parse_body(raw: bytes) -> dict:
    try:
        records = decode_records(raw.decode("utf-8"))
    except (UnicodeDecodeError, ValueError) as exc:
        raise ServiceError(400, f"unreadable request body: {exc}") from exc
    if len(records) != 1:
        raise ServiceError(400, f"expected exactly 1 record, got {len(records)}")
    return records[0]


def _field(record: dict, key: str) -> str:
    value = record.get(key)
    if value is None:
        raise ServiceError(400, f"missing field {key!r}")
    if isinstance(value, list):
        raise ServiceError(400, f"field {key!r} given more than once")
    return value


class SessionStore:
    """Owns every annotation session and its on-disk trail.

    Each session leaves three files in the sessions directory: a meta
    file freezing the rankings the session was created from, an
    append-only event log, and a token journal for idempotent retries.
    """

    def __init__(self, data: pipeline.DataDir, catalog: Catalog):
        self.data = data
        self.catalog = catalog
        self.sessions: dict[str, annotate.AnnotationSession] = {}
        self.tokens: dict[str, dict[str, tuple[str, str]]] = {}
        self.create_tokens: dict[str, str] = {}
        self.locks: dict[str, threading.Lock] = {}
        self._create_lock = threading.Lock()

    # ----------------------------------------------------- persistence

    def _meta_path(self, session_id: str) -> Path:
        return self.data.sessions_dir / f"{session_id}.meta"

    def _log_path(self, session_id: str) -> Path:
        return self.data.sessions_dir / f"{session_id}.log"

    def _tokens_path(self, session_id: str) -> Path:
        return self.data.sessions_dir / f"{session_id}.tokens"

    @property
    def _create_tokens_path(self) -> Path:
        return self.data.sessions_dir / "create.tokens"

    def _write_meta(self, session: annotate.AnnotationSession) -> None:
        records = [{
            "kind": "session",
            "session_id": session.session_id,
            "query_id": session.query_id,
        }]
        for side, ranking in (
            ("visual", session.visual_ranking),
            ("textual", session.textual_ranking),
        ):
            for video_id, score in ranking:
                records.append({
                    "kind": side, "video_id": video_id, "score": repr(score)
                })
        with open(self._meta_path(session.session_id), "w",
                  encoding="utf-8") as handle:
            handle.write(encode_records(records))

    def _load_meta(self, path: Path) -> annotate.AnnotationSession:
        with open(path, encoding="utf-8") as handle:
            records = decode_records(handle.read())
        if not records or records[0].get("kind") != "session":
            raise ValueError(f"{path}: first record must have kind: session")
        head = records[0]
        rankings = {"visual": [], "textual": []}
        for record in records[1:]:
            kind = record.get("kind")
            if kind not in rankings:
                raise ValueError(f"{path}: unexpected record kind {kind!r}")
            rankings[kind].append(
                (record["video_id"], float(record["score"]))
            )
        return annotate.create_session(
            head["session_id"],
            head["query_id"],
            rankings["visual"],
            rankings["textual"],
            self.catalog,
        )

    def _append_token(self, session_id: str, token: str,
                      video_id: str, label: str) -> None:
        with open(self._tokens_path(session_id), "a", encoding="utf-8") as handle:
            handle.write(f"{token}\t{video_id}\t{label}\n")
        self.tokens[session_id][token] = (video_id, label)

    def _load_tokens(self, session_id: str) -> None:
        journal: dict[str, tuple[str, str]] = {}
        path = self._tokens_path(session_id)
        if path.exists():
            with open(path, encoding="utf-8") as handle:
                for line in handle:
                    line = line.rstrip("\n")
                    if not line:
                        continue
                    token, video_id, label = line.split("\t")
                    journal[token] = (video_id, label)
        self.tokens[session_id] = journal

    def restore(self) -> None:
        """Rebuild every session found on disk by replaying its log."""
        for path in sorted(self.data.sessions_dir.glob("*.meta")):
            session = self._load_meta(path)
            log = self._log_path(session.session_id)
            if log.exists():
                annotate.replay_events(session, annotate.read_event_log(log))
            self.sessions[session.session_id] = session
            self.locks[session.session_id] = threading.Lock()
            self._load_tokens(session.session_id)
        if self._create_tokens_path.exists():
            with open(self._create_tokens_path, encoding="utf-8") as handle:
                for line in handle:
                    line = line.rstrip("\n")
                    if line:
                        token, session_id = line.split("\t")
                        self.create_tokens[token] = session_id

    # ------------------------------------------------------ operations

    def get(self, session_id: str) -> annotate.AnnotationSession:
        session = self.sessions.get(session_id)
        if session is None:
            raise ServiceError(404, f"unknown session {session_id!r}")
        return session

    def _next_session_id(self) -> str:
        highest = 0
        for session_id in self.sessions:
            match = _SESSION_ID_RE.match(session_id)
            if match:
                highest = max(highest, int(match.group(1)))
        return f"s{highest + 1:04d}"

    def create(self, query_id: str, visual_ranking, textual_ranking,
               token: "str | None" = None) -> annotate.AnnotationSession:
        with self._create_lock:
            if token is not None and token in self.create_tokens:
                return self.get(self.create_tokens[token])
            session_id = self._next_session_id()
            session = annotate.create_session(
                session_id, query_id, visual_ranking, textual_ranking,
                self.catalog,
            )
            self.sessions[session_id] = session
            self.locks[session_id] = threading.Lock()
            self.tokens[session_id] = {}
            self._write_meta(session)
            if token is not None:
                with open(self._create_tokens_path, "a",
                          encoding="utf-8") as handle:
                    handle.write(f"{token}\t{session_id}\n")
                self.create_tokens[token] = session_id
            return session

    def label(self, session_id: str, video_id: str, label: str,
              token: str) -> annotate.AnnotationSession:
        session = self.get(session_id)
        if label not in annotate.LABELS:
            raise ServiceError(400, f"unknown label {label!r}")
        with self.locks[session_id]:
            journal = self.tokens[session_id]
            if token in journal:
                if journal[token] != (video_id, label):
                    raise ServiceError(
                        409, "request token reused with a different payload"
                    )
                return session
            try:
                event = annotate.record_label(session, video_id, label)
            except ValueError as exc:
                raise ServiceError(409, str(exc)) from exc
            annotate.append_event(self._log_path(session_id), event)
            self._append_token(session_id, token, video_id, label)
        return session


def _load_queries(data: pipeline.DataDir) -> list[str]:
    if data.queries_path.exists():
        return pipeline.read_query_ids(data.queries_path)
    if data.world_path.exists():
        return list(synth.load_world(data.world_path).queries)
    return []


class Service:
    """Everything the endpoints need, loaded once at startup."""

    def __init__(self, data: pipeline.DataDir):
        if not data.catalog_path.exists():
            raise FileNotFoundError(f"{data.catalog_path}: no catalog to serve")
        if not data.visual_index_path.exists():
            raise FileNotFoundError(
                f"{data.visual_index_path}: no index; run the pipeline first"
            )
        data.ensure()
        self.data = data
        self.catalog = load_catalog(data.catalog_path)
        self.visual = index.load_index(data.visual_index_path)
        self.textual = index.load_index(data.textual_index_path)
        self.query_ids = _load_queries(data)
        self.store = SessionStore(data, self.catalog)
        self.store.restore()

    # ------------------------------------------------------- rankings

    def _ranking(self, side: index.InvertedIndex, query_id: str,
                 depth: int) -> list[tuple[str, float]]:
        if query_id not in side:
            return []
        vector = index.document_vector(side, query_id)
        hits = index.query_top_k(side, vector, k=depth + 1)
        ranked = [(vid, score) for vid, score in hits if vid != query_id]
        return ranked[:depth]

    def rankings_for(self, query_id: str,
                     depth: int = RANKING_DEPTH) -> tuple[list, list]:
        return (
            self._ranking(self.visual, query_id, depth),
            self._ranking(self.textual, query_id, depth),
        )

    # -------------------------------------------------------- records

    def _keyframe_urls(self, video_id: str) -> list[str]:
        strip_dir = self.data.keyframes_dir / video_id
        if not strip_dir.is_dir():
            return []
        return [
            f"/v1/keyframes/{video_id}/{path.name}"
            for path in sorted(strip_dir.glob("*.png"))
        ]

    def video_record(self, video_id: str) -> dict:
        video = self.catalog.videos.get(video_id)
        if video is None:
            raise ServiceError(404, f"unknown video {video_id!r}")
        record = {
            "video_id": video.video_id,
            "title": video.title,
            "published_at": format_timestamp(video.published_at),
            "duration_s": str(video.duration_s),
            "uploader_id": video.uploader_id,
        }
        if video.event_id:
            record["event_id"] = video.event_id
        keyframes = self._keyframe_urls(video_id)
        if keyframes:
            record["keyframe"] = keyframes
        return record

    def ticket_record(self, session: annotate.AnnotationSession) -> dict:
        record = {"session_id": session.session_id,
                  "query_id": session.query_id}
        record.update(
            (key, str(value)) for key, value in session.progress().items()
        )
        return record


def build_app(data: pipeline.DataDir) -> FastAPI:
    """Wire the endpoints over one data directory."""
    service = Service(data)
    app = FastAPI(title="fivr", docs_url=None, redoc_url=None)
    app.state.service = service

    @app.exception_handler(ServiceError)
    async def _handle_service_error(request: Request, exc: ServiceError):
        return _error_response(exc.status, exc.message)

    @app.get("/v1/queries")
    async def get_queries() -> Response:
        records = []
        for rank, query_id in enumerate(service.query_ids, start=1):
            record = {"rank": str(rank)}
            record.update(service.video_record(query_id))
            records.append(record)
        return _records_response(records)

    @app.get("/v1/videos/{video_id}")
    async def get_video(video_id: str) -> Response:
        return _records_response([service.video_record(video_id)])

    @app.get("/v1/keyframes/{video_id}/{name}")
    async def get_keyframe(video_id: str, name: str) -> Response:
        if not _KEYFRAME_RE.match(name):
            raise ServiceError(404, f"no keyframe {name!r}")
        path = service.data.keyframes_dir / video_id / name
        if not path.is_file():
            raise ServiceError(404, f"no keyframe {name!r} for {video_id!r}")
        return Response(content=path.read_bytes(), media_type="image/png")

    @app.get("/v1/sessions")
    async def list_sessions() -> Response:
        records = [
            service.ticket_record(service.store.sessions[session_id])
            for session_id in sorted(service.store.sessions)
        ]
        return _records_response(records)

    @app.post("/v1/sessions")
    async def create_session(request: Request) -> Response:
        body = _parse_body(await request.body())
        query_id = _field(body, "query_id")
        if query_id not in service.catalog.videos:
            raise ServiceError(404, f"unknown video {query_id!r}")
        token = body.get("request_token")
        if isinstance(token, list):
            raise ServiceError(400, "field 'request_token' given more than once")
        visual, textual = service.rankings_for(query_id)
        session = service.store.create(query_id, visual, textual, token=token)
        return _records_response([service.ticket_record(session)], status=201)

    @app.get("/v1/sessions/{session_id}/next")
    async def next_candidate(session_id: str) -> Response:
        session = service.store.get(session_id)
        with service.store.locks[session_id]:
            candidate = annotate.next_candidate(session)
            if candidate is None:
                record = {"status": "done"}
                record.update(service.ticket_record(session))
                return _records_response([record])
            scores = {
                "visual_score": repr(dict(session.visual_ranking).get(
                    candidate, 0.0)),
                "textual_score": repr(dict(session.textual_ranking).get(
                    candidate, 0.0)),
            }
            record = {"status": "pending"}
            record.update(service.video_record(candidate))
            record.update(scores)
            record.update(
                (key, str(value))
                for key, value in session.progress().items()
            )
            return _records_response([record])

    @app.post("/v1/sessions/{session_id}/label")
    async def post_label(session_id: str, request: Request) -> Response:
        body = _parse_body(await request.body())
        video_id = _field(body, "video_id")
        label = _field(body, "label")
        token = _field(body, "request_token")
        session = service.store.label(session_id, video_id, label, token)
        record = {"status": "ok", "video_id": video_id, "label": label}
        record.update(service.ticket_record(session))
        return _records_response([record])

    @app.get("/v1/sessions/{session_id}/progress")
    async def get_progress(session_id: str) -> Response:
        session = service.store.get(session_id)
        return _records_response([service.ticket_record(session)])

    return app
