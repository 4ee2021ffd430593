"""HTTP surface for the turn pipeline.

    POST /v1/slots/extract   run one turn through the pipeline
    GET  /healthz            liveness plus session / in-flight counts
    GET  /v1/registry        read-only dump of labels and constraints

Sessions are implicit (created on first use), held in memory and evicted
after ``session_ttl_s`` idle seconds. Requests for one session are
serialized on a per-session lock; different sessions run concurrently in the
worker thread pool. When ``max_in_flight`` requests are active, new ones get
503 ``overloaded`` instead of queueing.
"""

from __future__ import annotations

import dataclasses
import json
import os
import threading
import time
from collections.abc import Mapping
from dataclasses import dataclass
from pathlib import Path
from typing import Any

from fastapi import FastAPI
from fastapi.concurrency import run_in_threadpool
from fastapi.responses import JSONResponse
from pydantic import BaseModel, Field, field_validator

from slotfill.backends import (
    GenerationBackend,
    HttpGenerationBackend,
    NoisyMockBackend,
    OracleBackend,
    ReplayBackend,
)
from slotfill.model import Speaker, Turn, load_annotated
from slotfill.pipeline import Pipeline, PipelineConfig, Session, Status
from slotfill.prefilter import HttpExtractor
from slotfill.registry import SlotRegistry

BACKEND_KINDS = ("http", "oracle", "noisy-mock", "replay")
ENV_PREFIX = "SLOTFILL_"


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ServiceConfig:
    host: str = "127.0.0.1"
    port: int = 8080
    registry_path: str = "fixtures/registry.json"
    backend: str = "http"
    generation_url: str | None = None
    extractor_url: str | None = None
    corpus_path: str | None = None
    replay_path: str | None = None
    noise_rate: float = 0.3
    seed: int = 0
    context_turns: int = 4
    text_turns: int = 1
    max_in_flight: int = 128
    request_timeout_s: float = 10.0
    session_ttl_s: float = 1800.0

    def __post_init__(self):
        if self.max_in_flight < 1:
            raise ConfigError(f"max_in_flight must be >= 1, got {self.max_in_flight}")
        if self.request_timeout_s <= 0:
            raise ConfigError(f"request_timeout_s must be > 0, got {self.request_timeout_s}")
        if self.backend not in BACKEND_KINDS:
            raise ConfigError(f"backend must be one of {BACKEND_KINDS}, got {self.backend!r}")

    @classmethod
    def resolve(
        cls,
        file: str | Path | None = None,
        env: Mapping[str, str] | None = None,
        flags: Mapping[str, Any] | None = None,
    ) -> ServiceConfig:
        """Merge defaults < JSON file < ``SLOTFILL_*`` env vars < explicit flags (None flags are skipped)."""
        fields = {f.name: f for f in dataclasses.fields(cls)}
        values: dict[str, Any] = {}
        if file:
            with open(file, encoding="utf-8") as fh:
                data = json.load(fh)
            unknown = set(data) - set(fields)
            if unknown:
                raise ConfigError(f"unknown config keys: {sorted(unknown)}")
            values.update(data)
        env = os.environ if env is None else env
        for name, f in fields.items():
            raw = env.get(ENV_PREFIX + name.upper())
            if raw is not None:
                values[name] = _coerce(raw, f.type, name)
        values.update({k: v for k, v in (flags or {}).items() if v is not None and k in fields})
        return cls(**values)


def _coerce(raw: str, type_name: Any, name: str) -> Any:
    t = str(type_name)
    try:
        if t.startswith("int"):
            return int(raw)
        if t.startswith("float"):
            return float(raw)
    except ValueError:
        raise ConfigError(f"{ENV_PREFIX}{name.upper()}={raw!r} is not a valid {t}") from None
    return raw


def build_backend(config: ServiceConfig, registry: SlotRegistry) -> GenerationBackend:
    required = {"http": "generation_url", "replay": "replay_path", "oracle": "corpus_path", "noisy-mock": "corpus_path"}
    if not getattr(config, required[config.backend]):
        raise ConfigError(f"backend {config.backend!r} needs {required[config.backend]}")
    if config.backend == "http":
        return HttpGenerationBackend(config.generation_url, timeout=config.request_timeout_s)
    if config.backend == "replay":
        return ReplayBackend.load(config.replay_path)
    corpus, diagnostics = load_annotated(config.corpus_path)
    if diagnostics:
        raise ConfigError(f"{config.corpus_path}: " + "; ".join(map(str, diagnostics[:5])))
    if config.backend == "oracle":
        return OracleBackend(corpus)
    return NoisyMockBackend(corpus, registry, config.noise_rate, config.seed)


# -- wire schema


class TurnIn(BaseModel):
    speaker: Speaker
    text: str = Field(min_length=1)

    @field_validator("text")
    @classmethod
    def _non_blank(cls, v: str) -> str:
        if not v.strip():
            raise ValueError("text must contain non-whitespace characters")
        return v


class WindowIn(BaseModel):
    context: int = Field(ge=0, le=64)
    text: int = Field(ge=1, le=16)


class ExtractRequest(BaseModel):
    session_id: str = Field(min_length=1, max_length=256)
    turn: TurnIn
    labels: list[str] | None = None
    window: WindowIn | None = None


@dataclass
class _SessionSlot:
    session: Session
    lock: threading.Lock
    last_used: float


class SessionTable:
    """Atomic get-or-create over in-memory sessions with idle-TTL eviction."""

    def __init__(self, pipeline: Pipeline, ttl_s: float, clock=time.monotonic):
        self.pipeline = pipeline
        self.ttl_s = ttl_s
        self._clock = clock
        self._lock = threading.Lock()
        self._slots: dict[str, _SessionSlot] = {}
        self._last_sweep = clock()

    def __len__(self) -> int:
        return len(self._slots)

    def get_or_create(self, session_id: str) -> _SessionSlot:
        now = self._clock()
        with self._lock:
            if now - self._last_sweep >= min(self.ttl_s, 60.0):
                self._sweep(now)
            slot = self._slots.get(session_id)
            if slot is None:
                slot = _SessionSlot(self.pipeline.new_session(session_id), threading.Lock(), now)
                self._slots[session_id] = slot
            slot.last_used = now
            return slot

    def _sweep(self, now: float) -> None:
        expired = [k for k, s in self._slots.items() if now - s.last_used > self.ttl_s and not s.lock.locked()]
        for k in expired:
            del self._slots[k]
        self._last_sweep = now


def create_app(pipeline: Pipeline, config: ServiceConfig | None = None) -> FastAPI:
    config = config or ServiceConfig()
    app = FastAPI(title="slotfill", version="1")
    sessions = SessionTable(pipeline, config.session_ttl_s)
    state = {"in_flight": 0}
    app.state.sessions = sessions
    app.state.pipeline = pipeline

    def run_turn(req: ExtractRequest) -> dict:
        t0 = time.perf_counter()
        slot = sessions.get_or_create(req.session_id)
        with slot.lock:
            session = slot.session
            if req.labels is not None:
                session.requested_labels = Session(session.transcript_id, req.labels).requested_labels
            if req.window is not None:
                session.context_turns, session.text_turns = req.window.context, req.window.text
            turn = Turn(len(session.history), req.turn.speaker, req.turn.text)
            result = pipeline.process_turn(session, turn)
        total = time.perf_counter() - t0
        timings = {k: v * 1000.0 for k, v in result.timings.items()}
        timings["total"] = total * 1000.0
        timings["overhead"] = (total - result.timings["backend"]) * 1000.0
        return {
            "session_id": req.session_id,
            "turn_index": result.turn_index,
            "status": result.status.value,
            "frame": result.frame.to_dict(),
            "narrowed_labels": result.narrowed_labels,
            "timings_ms": timings,
            "warnings": result.warnings,
            "error": result.error,
        }

    @app.post("/v1/slots/extract")
    async def extract(req: ExtractRequest):
        if state["in_flight"] >= config.max_in_flight:
            return JSONResponse({"detail": "overloaded", "max_in_flight": config.max_in_flight}, status_code=503)
        state["in_flight"] += 1
        try:
            body = await run_in_threadpool(run_turn, req)
        finally:
            state["in_flight"] -= 1
        code = 200 if body["status"] == Status.OK.value else 502
        return JSONResponse(body, status_code=code)

    @app.get("/healthz")
    async def healthz():
        return {"status": "ok", "sessions": len(sessions), "in_flight": state["in_flight"]}

    @app.get("/v1/registry")
    async def registry_dump():
        return {"labels": pipeline.registry.to_config()}

    return app


def app_from_config(config: ServiceConfig) -> FastAPI:
    registry = SlotRegistry.load(config.registry_path)
    extractor = HttpExtractor(config.extractor_url, config.request_timeout_s) if config.extractor_url else None
    pipeline = Pipeline(
        registry,
        build_backend(config, registry),
        extractor,
        PipelineConfig(context_turns=config.context_turns, text_turns=config.text_turns),
    )
    return create_app(pipeline, config)
