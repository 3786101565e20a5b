"""HTTP facade over the pipeline: sessions, ingest, chat, feedback.

State is in-memory and demo-scale: sessions live in a capacity-bounded
store and the oldest idle one is evicted when full. Mutating requests on
the same session are serialized FIFO; different sessions never contend.
Every error body is {"code": SCREAMING_SNAKE, "message": str}.
"""
from __future__ import annotations

import base64
import binascii
import logging
import secrets
import tempfile
import threading
import time
from collections import deque
from pathlib import Path
from typing import Optional

from fastapi import Body, FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse
from starlette.exceptions import HTTPException as StarletteHTTPException
from starlette.staticfiles import StaticFiles

from . import layout as layout_mod
from . import recommend as recommend_mod
from .errors import MenulensError, NotFound, SchemaError
from .keyframe import detection_from_obj, parse_dims, select_keyframe
from .llmclient import LlmClientConfig
from .menu import DigitalMenu, Provenance, build_menu, llm_structure_menu, menu_to_obj
from .ocr import DEFAULT_OCR_TIMEOUT, OcrDocument, run_external_ocr, token_from_obj
from .prefs import load_preference_dir
from .recommend import ChatSession, new_session, recommendation_to_obj

logger = logging.getLogger(__name__)

DEFAULT_CAPACITY = 1000


class ApiError(Exception):
    """Carries an HTTP status plus the documented error body."""

    def __init__(self, status: int, code: str, message: str):
        super().__init__(message)
        self.status = status
        self.code = code
        self.message = message


class FifoLock:
    """Mutex handing ownership to waiters strictly in arrival order."""

    def __init__(self):
        self._mutex = threading.Lock()
        self._waiters: deque[threading.Event] = deque()
        self._locked = False

    def acquire(self):
        with self._mutex:
            if not self._locked:
                self._locked = True
                return
            event = threading.Event()
            self._waiters.append(event)
        event.wait()

    def release(self):
        with self._mutex:
            if self._waiters:
                self._waiters.popleft().set()  # ownership transfers, stays locked
            else:
                self._locked = False

    def locked(self) -> bool:
        with self._mutex:
            return self._locked

    def __enter__(self):
        self.acquire()
        return self

    def __exit__(self, *exc):
        self.release()


class SessionEntry:
    def __init__(self, session: ChatSession):
        self.session = session
        self.lock = FifoLock()
        self.last_access = time.monotonic()

    def touch(self):
        self.last_access = time.monotonic()


class SessionStore:
    """Capacity-bounded map of session id -> entry; oldest idle evicted."""

    def __init__(self, capacity: int = DEFAULT_CAPACITY):
        self.capacity = capacity
        self._entries: dict[str, SessionEntry] = {}
        self._mutex = threading.Lock()

    def create(self, session: ChatSession) -> None:
        with self._mutex:
            if len(self._entries) >= self.capacity:
                idle = [
                    (entry.last_access, sid)
                    for sid, entry in self._entries.items()
                    if not entry.lock.locked()
                ]
                if not idle:
                    raise ApiError(507, "SESSION_CAPACITY", "session store full and every session busy")
                _, victim = min(idle)
                del self._entries[victim]
                logger.info("evicted idle session %s", victim)
            self._entries[session.id] = SessionEntry(session)

    def get(self, session_id: str) -> SessionEntry:
        with self._mutex:
            entry = self._entries.get(session_id)
        if entry is None:
            raise ApiError(404, "SESSION_NOT_FOUND", f"unknown session {session_id!r}")
        entry.touch()
        return entry

    def __len__(self) -> int:
        with self._mutex:
            return len(self._entries)


def new_session_id() -> str:
    return secrets.token_urlsafe(16)


def _ingest_from_payload(
    payload: dict,
    llm_config: Optional[LlmClientConfig],
    ocr_cmd: Optional[str],
    ocr_timeout: float,
) -> DigitalMenu:
    if payload.get("use_external_ocr"):
        if not ocr_cmd:
            raise ApiError(400, "NO_OCR_ENGINE", "server started without an --ocr-cmd")
        image_b64 = payload.get("image")
        if not isinstance(image_b64, str):
            raise ApiError(400, "BAD_REQUEST", "'image' must be a base64 string")
        try:
            image_bytes = base64.b64decode(image_b64, validate=True)
        except (binascii.Error, ValueError):
            raise ApiError(400, "BAD_REQUEST", "'image' is not valid base64")
        with tempfile.NamedTemporaryFile(suffix=".img") as handle:
            handle.write(image_bytes)
            handle.flush()
            ocr_doc = run_external_ocr(handle.name, ocr_cmd, timeout=ocr_timeout)
        provenance = Provenance(image_ref=ocr_doc.image_ref, keyframe_index=None)
        return _parse_doc(ocr_doc, provenance, llm_config)

    raw_dets = payload.get("detections")
    if not isinstance(raw_dets, list):
        raise ApiError(400, "BAD_REQUEST", "'detections' must be an array")
    dims = parse_dims(payload.get("dims"))
    detections = [detection_from_obj(obj) for obj in raw_dets]
    ocr_documents = payload.get("ocr_documents")
    if not isinstance(ocr_documents, dict):
        raise ApiError(400, "BAD_REQUEST", "'ocr_documents' must map frame indices to OCR documents")
    frame = select_keyframe(detections, dims)
    doc_obj = ocr_documents.get(str(frame))
    if doc_obj is None:
        raise ApiError(422, "OCR_DOCUMENT_MISSING", f"no OCR document for keyframe {frame}")
    ocr_doc = _ocr_doc_from_obj(doc_obj)
    provenance = Provenance(image_ref=ocr_doc.image_ref, keyframe_index=frame)
    return _parse_doc(ocr_doc, provenance, llm_config)


def _ocr_doc_from_obj(obj) -> OcrDocument:
    if not isinstance(obj, dict):
        raise SchemaError("ocr_documents", "each OCR document must be an object")
    dims = parse_dims(obj.get("dims"))
    raw_tokens = obj.get("tokens")
    if not isinstance(raw_tokens, list):
        raise SchemaError("tokens", "'tokens' must be an array")
    tokens = [token_from_obj(t, dims) for t in raw_tokens]
    return OcrDocument(image_ref=str(obj.get("image_ref", "")), dims=dims, tokens=tokens)


def _parse_doc(
    ocr_doc: OcrDocument,
    provenance: Provenance,
    llm_config: Optional[LlmClientConfig],
) -> DigitalMenu:
    doc = layout_mod.analyze_tokens(ocr_doc.tokens, ocr_doc.dims.width)
    if llm_config is not None:
        return llm_structure_menu(doc, provenance, config=llm_config)
    return build_menu(doc, provenance)


def create_app(
    profiles_dir: Optional[str] = None,
    static_dir: Optional[str] = None,
    llm_config: Optional[LlmClientConfig] = None,
    ocr_cmd: Optional[str] = None,
    ocr_timeout: float = DEFAULT_OCR_TIMEOUT,
    capacity: int = DEFAULT_CAPACITY,
) -> FastAPI:
    app = FastAPI(title="menulens", docs_url=None, redoc_url=None)
    store = SessionStore(capacity=capacity)
    app.state.store = store
    app.state.llm_config = llm_config

    @app.exception_handler(ApiError)
    async def handle_api_error(_request: Request, exc: ApiError):
        return JSONResponse(status_code=exc.status, content={"code": exc.code, "message": exc.message})

    @app.exception_handler(MenulensError)
    async def handle_pipeline_error(_request: Request, exc: MenulensError):
        status = {
            "NO_MENU_DETECTED": 422,
            "EMPTY_MENU": 422,
            "NO_ELIGIBLE_ITEMS": 422,
            "PARSE_ERROR": 400,
            "SCHEMA_ERROR": 400,
            "INVALID_GEOMETRY": 400,
            "ENGINE_ERROR": 502,
            "ENGINE_TIMEOUT": 504,
            "LLM_REJECTED": 502,
            "LLM_UNAVAILABLE": 502,
            "NOT_FOUND": 404,
        }.get(exc.code, 500)
        return JSONResponse(status_code=status, content={"code": exc.code, "message": str(exc)})

    @app.exception_handler(RequestValidationError)
    async def handle_validation_error(_request: Request, exc: RequestValidationError):
        return JSONResponse(status_code=400, content={"code": "BAD_REQUEST", "message": str(exc.errors()[:1])})

    @app.exception_handler(StarletteHTTPException)
    async def handle_http_error(_request: Request, exc: StarletteHTTPException):
        code = "NOT_FOUND" if exc.status_code == 404 else "HTTP_ERROR"
        return JSONResponse(status_code=exc.status_code, content={"code": code, "message": str(exc.detail)})

    @app.get("/healthz")
    def healthz():
        return {"status": "ok"}

    @app.post("/v1/sessions", status_code=201)
    def create_session(payload: Optional[dict] = Body(None)):
        payload = payload or {}
        docs = []
        profile = payload.get("preferences_profile")
        if profile is not None:
            if not isinstance(profile, str) or not profiles_dir:
                raise ApiError(404, "PROFILE_NOT_FOUND", f"unknown preference profile {profile!r}")
            profile_path = Path(profiles_dir) / profile
            try:
                docs = load_preference_dir(profile_path)
            except NotFound:
                raise ApiError(404, "PROFILE_NOT_FOUND", f"unknown preference profile {profile!r}")
        session = new_session(new_session_id(), docs=docs)
        store.create(session)
        return {"session_id": session.id}

    @app.post("/v1/sessions/{session_id}/ingest")
    def ingest(session_id: str, payload: dict = Body(...)):
        entry = store.get(session_id)
        with entry.lock:
            menu = _ingest_from_payload(payload, llm_config, ocr_cmd, ocr_timeout)
            entry.session.menu = menu
            entry.session.rejected_items.clear()
            return menu_to_obj(menu)

    @app.post("/v1/sessions/{session_id}/chat")
    def chat_endpoint(session_id: str, payload: dict = Body(...)):
        entry = store.get(session_id)
        query = payload.get("query")
        if not isinstance(query, str) or not query.strip():
            raise ApiError(400, "BAD_REQUEST", "'query' must be a non-empty string")
        k = payload.get("k", recommend_mod.DEFAULT_K)
        if not isinstance(k, int) or k < 1:
            raise ApiError(400, "BAD_REQUEST", "'k' must be a positive integer")
        with entry.lock:
            if entry.session.menu is None:
                raise ApiError(409, "NO_MENU_INGESTED", "ingest a menu before chatting")
            rec = recommend_mod.chat(entry.session, query, k=k, config=llm_config)
            return recommendation_to_obj(rec, entry.session.menu)

    @app.post("/v1/sessions/{session_id}/feedback")
    def feedback(session_id: str, payload: dict = Body(...)):
        entry = store.get(session_id)
        rejected = payload.get("rejected_item_ids")
        if not isinstance(rejected, list) or not all(isinstance(v, str) for v in rejected):
            raise ApiError(400, "BAD_REQUEST", "'rejected_item_ids' must be an array of item ids")
        with entry.lock:
            if entry.session.menu is None:
                raise ApiError(409, "NO_MENU_INGESTED", "ingest a menu before sending feedback")
            try:
                rec = recommend_mod.regenerate(entry.session, rejected, config=llm_config)
            except KeyError as e:
                raise ApiError(400, "INVALID_ITEM_ID", f"unknown item id {e.args[0]!r}")
            return recommendation_to_obj(rec, entry.session.menu)

    @app.get("/v1/sessions/{session_id}/menu")
    def get_menu(session_id: str):
        entry = store.get(session_id)
        if entry.session.menu is None:
            raise ApiError(404, "NO_MENU_INGESTED", "no menu ingested for this session")
        return menu_to_obj(entry.session.menu)

    if static_dir:
        app.mount("/", StaticFiles(directory=static_dir, html=True), name="static")

    return app
