"""Online orchestration of one dialogue turn:

window -> prefilter -> narrow -> prompt -> backend -> parse -> ITN -> constraints

plus the ablation driver that scores truncated variants of the same chain.
"""

from __future__ import annotations

import time
from collections.abc import Iterable, Sequence
from dataclasses import dataclass, field
from enum import Enum

from slotfill.backends import DEFAULT_MAX_TOKENS, DEFAULT_TEMPERATURE, BackendError, GenerationBackend
from slotfill.constraints import ConstraintVerdict, filter_frame
from slotfill.evaluation import EvalReport, SemanticMatcher, evaluate
from slotfill.itn import apply_itn
from slotfill.labels import canonicalize_label
from slotfill.model import AnnotatedTranscript, SlotFrame, Turn
from slotfill.prefilter import Candidate, Extractor, detect_abstractive, extract_candidates, narrow_labels
from slotfill.registry import SlotRegistry
from slotfill.responses import UnparseableResponseError, parse_model_response
from slotfill.templates import render_dialogue, render_instruction, render_prompt

STAGES = ("window", "prefilter", "narrow", "prompt", "backend", "parse", "itn", "constraints")


class OutOfOrderTurnError(ValueError):
    pass


class Status(str, Enum):
    OK = "ok"
    BACKEND_ERROR = "backend_error"
    PARSE_ERROR = "parse_error"


@dataclass(frozen=True)
class PipelineConfig:
    context_turns: int = 4
    text_turns: int = 1
    passthrough_on_empty: bool = False
    min_score: float = 0.0
    max_tokens: int = DEFAULT_MAX_TOKENS
    temperature: float = DEFAULT_TEMPERATURE

    def __post_init__(self):
        if self.context_turns < 0:
            raise ValueError(f"context_turns must be >= 0, got {self.context_turns}")
        if self.text_turns < 1:
            raise ValueError(f"text_turns must be >= 1, got {self.text_turns}")


@dataclass
class Session:
    transcript_id: str
    requested_labels: list[str]
    context_turns: int = 4
    text_turns: int = 1
    history: list[Turn] = field(default_factory=list)

    def __post_init__(self):
        if self.context_turns < 0 or self.text_turns < 1:
            raise ValueError("window sizes must be context >= 0 and text >= 1")
        self.requested_labels = list(dict.fromkeys(canonicalize_label(x) for x in self.requested_labels))

    def window(self) -> tuple[list[Turn], list[Turn]]:
        """(context turns, text turns) ending at the newest turn."""
        text = self.history[-self.text_turns :] if self.history else []
        start = len(self.history) - len(text)
        context = self.history[max(0, start - self.context_turns) : start]
        return context, text


@dataclass
class PipelineResult:
    turn_index: int
    status: Status
    frame: SlotFrame
    narrowed_labels: list[str]
    candidates: list[Candidate]
    verdicts: list[ConstraintVerdict]
    timings: dict[str, float]
    backend_raw: str | None = None
    warnings: list[str] = field(default_factory=list)
    error: str | None = None

    @property
    def ok(self) -> bool:
        return self.status is Status.OK

    def to_record(self) -> dict:
        return {
            "turn_index": self.turn_index,
            "status": self.status.value,
            "frame": self.frame.to_dict(),
            "narrowed_labels": list(self.narrowed_labels),
            "verdicts": [v.to_record() for v in self.verdicts],
            "timings_ms": {k: v * 1000.0 for k, v in self.timings.items()},
            "backend_raw": self.backend_raw,
            "warnings": list(self.warnings),
            "error": self.error,
        }


def build_query_prompt(session: Session, narrowed: Sequence[str]) -> str:
    """Serving prompt for the current window; the label slot carries ``narrowed`` only."""
    if not narrowed:
        raise ValueError("narrowed label list is empty")
    context, text = session.window()
    return render_prompt(render_instruction(context, text, narrowed))


class _Clock:
    def __init__(self):
        self.timings = dict.fromkeys(STAGES, 0.0)
        self._t = time.perf_counter()

    def lap(self, stage: str) -> None:
        now = time.perf_counter()
        self.timings[stage] += now - self._t
        self._t = now


class Pipeline:
    def __init__(
        self,
        registry: SlotRegistry,
        backend: GenerationBackend,
        extractor: Extractor | None = None,
        config: PipelineConfig | None = None,
    ):
        self.registry = registry
        self.backend = backend
        self.extractor = extractor
        self.config = config or PipelineConfig()

    def new_session(
        self,
        transcript_id: str,
        requested_labels: Iterable[str] | None = None,
        context_turns: int | None = None,
        text_turns: int | None = None,
    ) -> Session:
        return Session(
            transcript_id,
            list(requested_labels) if requested_labels is not None else self.registry.labels(),
            self.config.context_turns if context_turns is None else context_turns,
            self.config.text_turns if text_turns is None else text_turns,
        )

    def process_turn(self, session: Session, turn: Turn) -> PipelineResult:
        if turn.index != len(session.history):
            raise OutOfOrderTurnError(
                f"session {session.transcript_id!r}: expected turn {len(session.history)}, got {turn.index}"
            )
        clock = _Clock()
        session.history.append(turn)
        context, text = session.window()
        clock.lap("window")

        main_text = render_dialogue(text)
        candidates = extract_candidates(
            main_text, self.registry, self.extractor, session.requested_labels, self.config.min_score
        )
        hits = detect_abstractive(render_dialogue([*context, *text]), self.registry)
        clock.lap("prefilter")

        narrowed = narrow_labels(session.requested_labels, candidates, hits)
        warnings = []
        if not narrowed and self.config.passthrough_on_empty and session.requested_labels:
            narrowed = list(session.requested_labels)
            warnings.append("prefilter proposed nothing; passing all requested labels through")
        clock.lap("narrow")

        def result(status: Status, frame: SlotFrame, verdicts=(), raw=None, error=None) -> PipelineResult:
            return PipelineResult(
                turn.index, status, frame, narrowed, candidates, list(verdicts), clock.timings, raw, warnings, error
            )

        if not narrowed:
            return result(Status.OK, SlotFrame())

        prompt = build_query_prompt(session, narrowed)
        clock.lap("prompt")
        try:
            raw = self.backend.generate(prompt, self.config.max_tokens, self.config.temperature)
        except BackendError as exc:
            clock.lap("backend")
            return result(Status.BACKEND_ERROR, SlotFrame(), error=str(exc))
        clock.lap("backend")

        try:
            parsed = parse_model_response(raw)
        except UnparseableResponseError as exc:
            clock.lap("parse")
            return result(Status.PARSE_ERROR, SlotFrame(), raw=raw, error=str(exc))
        dropped = sorted(set(parsed) - set(narrowed))
        if dropped:
            warnings.append(f"dropped labels not requested: {', '.join(dropped)}")
        parsed = parsed.restrict(narrowed)
        clock.lap("parse")

        normalized = {v: apply_itn(v) for _, v in parsed.pairs()}
        clock.lap("itn")
        frame, verdicts = filter_frame(parsed, self.registry, normalized)
        clock.lap("constraints")
        return result(Status.OK, frame, verdicts, raw)


ABLATION_MODES = ("prefilter_only", "constraints_only", "full")


def _candidate_frame(candidates: Iterable[Candidate]) -> SlotFrame:
    entries: dict[str, list[str]] = {}
    for c in candidates:
        entries.setdefault(c.label, []).append(c.value)
    return SlotFrame(entries)


def run_ablation(
    corpus: Sequence[AnnotatedTranscript],
    registry: SlotRegistry,
    backend: GenerationBackend,
    modes: Sequence[str] = ABLATION_MODES,
    config: PipelineConfig | None = None,
    extractor: Extractor | None = None,
    semantic: SemanticMatcher | None = None,
) -> dict[str, EvalReport]:
    """Score each mode against the gold frames; one unit per turn ("<id>:<index>").

    prefilter_only uses the extractor's candidates as the answer,
    constraints_only passes those candidates through the constraint filter,
    and full runs the complete pipeline with ``backend``.
    """
    unknown = set(modes) - set(ABLATION_MODES)
    if unknown:
        raise ValueError(f"unknown ablation modes {sorted(unknown)}")
    pipeline = Pipeline(registry, backend, extractor, config)
    ref: dict[str, SlotFrame] = {}
    preds: dict[str, dict[str, SlotFrame]] = {m: {} for m in modes}
    for doc in corpus:
        session = pipeline.new_session(doc.id)
        for turn in doc.transcript.turns:
            unit = f"{doc.id}:{turn.index}"
            ref[unit] = doc.frame(turn.index)
            res = pipeline.process_turn(session, turn)
            cand = _candidate_frame(res.candidates).restrict(session.requested_labels)
            if "prefilter_only" in preds:
                preds["prefilter_only"][unit] = cand
            if "constraints_only" in preds:
                preds["constraints_only"][unit] = filter_frame(cand, registry)[0]
            if "full" in preds:
                preds["full"][unit] = res.frame
    return {m: evaluate(preds[m], ref, semantic) for m in modes}
