"""Teacher annotation loop: render annotation prompts, map teacher responses
back onto transcript turns, and collect induced labels."""

from __future__ import annotations

import re
from collections.abc import Iterable, Sequence
from dataclasses import dataclass
from typing import NamedTuple

from slotfill.backends import BackendError, GenerationBackend
from slotfill.labels import LabelError, canonicalize_label
from slotfill.model import AnnotatedTranscript, SlotFrame, Source, Transcript, is_na
from slotfill.registry import SlotKind, SlotRegistry
from slotfill.responses import UnparseableResponseError, repair_json_object
from slotfill.templates import ANNOTATION_TEMPLATE, render_annotation_lines

PREFIX_MATCH_RATIO = 0.8
_SPEAKER_PREFIX_RE = re.compile(r"^\s*(?:agent|customer)\s+says\s*:\s*", re.I)


class AnnotationParseError(ValueError):
    pass


@dataclass(frozen=True)
class AnnotationRequest:
    prompt: str
    transcript_id: str
    seed_labels: tuple[str, ...]


def build_annotation_prompt(
    transcript: Transcript, labels: Iterable[str], max_labels: int | None = None
) -> AnnotationRequest:
    """Render the annotation prompt. ``max_labels`` caps the seed list (None: all)."""
    if not transcript.turns:
        raise ValueError(f"transcript {transcript.id!r} has no turns")
    seed = tuple(dict.fromkeys(canonicalize_label(x) for x in labels))
    if max_labels is not None:
        seed = seed[:max_labels]
    prompt = ANNOTATION_TEMPLATE.format(labels=", ".join(seed), text=render_annotation_lines(transcript.turns))
    return AnnotationRequest(prompt, transcript.id, seed)


class AnnotationResult(NamedTuple):
    annotated: AnnotatedTranscript
    induced: list[str]
    warnings: list[str]


def _collapse(text: str) -> str:
    return " ".join(text.split())


def _common_prefix(a: str, b: str) -> int:
    n = 0
    for x, y in zip(a, b):
        if x != y:
            break
        n += 1
    return n


def match_turn(key: str, transcript: Transcript) -> int | None:
    """Turn index for a response line key: exact whitespace-collapsed match,
    else the turn sharing the longest common prefix of at least 80% of its length."""
    needle = _collapse(_SPEAKER_PREFIX_RE.sub("", key))
    if not needle:
        return None
    collapsed = [_collapse(t.text) for t in transcript.turns]
    for i, text in enumerate(collapsed):
        if text == needle:
            return i
    best, best_len = None, 0
    for i, text in enumerate(collapsed):
        n = _common_prefix(needle, text)
        if n >= PREFIX_MATCH_RATIO * len(text) and n > best_len:
            best, best_len = i, n
    return best


def parse_annotation_response(raw: str, transcript: Transcript, registry: SlotRegistry) -> AnnotationResult:
    """Map a teacher response onto ``transcript``.

    Raises :class:`AnnotationParseError` when the response cannot be parsed
    or no line matches any turn.
    """
    try:
        obj, _ = repair_json_object(raw)
    except UnparseableResponseError as exc:
        raise AnnotationParseError(f"transcript {transcript.id!r}: {exc}") from None
    warnings: list[str] = []
    frames: dict[int, SlotFrame] = {}
    matched_any = False
    induced: dict[str, None] = {}
    for key, value in obj.items():
        idx = match_turn(str(key), transcript)
        if idx is None:
            warnings.append(f"unmatched response line {str(key)[:60]!r}")
            continue
        matched_any = True
        if is_na(value) or not isinstance(value, dict):
            if not is_na(value):
                warnings.append(f"turn {idx}: expected an object of slots, got {type(value).__name__}")
            continue
        entries = {}
        for label, v in value.items():
            try:
                canonical = canonicalize_label(str(label))
            except LabelError:
                warnings.append(f"turn {idx}: dropped empty label")
                continue
            entries.setdefault(canonical, [])
            entries[canonical].extend(v if isinstance(v, list) else [v])
        frame = SlotFrame(
            {k: [x if x is None or isinstance(x, str) else str(x) for x in vs if not isinstance(x, (dict, list))]
             for k, vs in entries.items()}
        )
        frames[idx] = frames.get(idx, SlotFrame()).union(frame)
        for label in frame:
            if label not in registry:
                induced[label] = None
    if not matched_any:
        raise AnnotationParseError(
            f"transcript {transcript.id!r}: none of {len(obj)} response lines matched a turn"
        )
    annotated = AnnotatedTranscript(transcript, frames, frozenset({Source.TEACHER}))
    return AnnotationResult(annotated, list(induced), warnings)


@dataclass
class CorpusAnnotation:
    annotated: list[AnnotatedTranscript]
    induced: list[str]
    warnings: list[str]
    failures: list[str]


def annotate_corpus(
    transcripts: Sequence[Transcript],
    registry: SlotRegistry,
    backend: GenerationBackend,
    max_labels: int | None = None,
) -> CorpusAnnotation:
    """Annotate transcripts in order; each request sees every label induced so far.

    Induced labels are registered as extractive with no constraints.
    """
    out = CorpusAnnotation([], [], [], [])
    for transcript in transcripts:
        request = build_annotation_prompt(transcript, registry.labels(), max_labels)
        try:
            raw = backend.generate(request.prompt)
            result = parse_annotation_response(raw, transcript, registry)
        except (BackendError, AnnotationParseError) as exc:
            out.failures.append(f"{transcript.id}: {exc}")
            continue
        for label in result.induced:
            registry.register(label, SlotKind.EXTRACTIVE)
            out.induced.append(label)
        out.annotated.append(result.annotated)
        out.warnings.extend(f"{transcript.id}: {w}" for w in result.warnings)
    return out
