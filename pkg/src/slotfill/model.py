"""Domain types shared across the package, plus transcript (de)serialization.

Transcript files hold one JSON record per line::

    {"id": "t1", "domain": "telecom",
     "turns": [{"speaker": "agent", "text": "..."}, ...]}

Annotated files add ``"frames": {"<turn_index>": {"<label>": [values...]}}``
and ``"source": "teacher" | "human" | "teacher+human"``.
"""

from __future__ import annotations

import json
from collections.abc import Iterable, Iterator, Mapping
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from types import MappingProxyType
from typing import Any, Callable

from slotfill.itn import apply_itn
from slotfill.labels import canonicalize_label


class ValidationError(ValueError):
    pass


class Speaker(str, Enum):
    AGENT = "agent"
    CUSTOMER = "customer"

    @property
    def title(self) -> str:
        return self.value.capitalize()


@dataclass(frozen=True)
class Turn:
    index: int
    speaker: Speaker
    text: str

    def __post_init__(self):
        if not isinstance(self.index, int) or self.index < 0:
            raise ValidationError(f"turn index must be a non-negative int, got {self.index!r}")
        if not isinstance(self.text, str) or not self.text.strip():
            raise ValidationError(f"turn {self.index}: text must be non-empty")
        object.__setattr__(self, "speaker", Speaker(self.speaker))


@dataclass(frozen=True)
class Transcript:
    id: str
    domain: str
    turns: tuple[Turn, ...]

    def __post_init__(self):
        object.__setattr__(self, "turns", tuple(self.turns))
        for pos, turn in enumerate(self.turns):
            if turn.index != pos:
                raise ValidationError(f"transcript {self.id!r}: turn at position {pos} has index {turn.index}")

    @classmethod
    def from_record(cls, rec: Mapping[str, Any]) -> Transcript:
        turns = rec["turns"]
        if not isinstance(turns, list):
            raise ValidationError("'turns' must be a list")
        return cls(
            str(rec["id"]),
            str(rec.get("domain", "")),
            tuple(Turn(i, Speaker(t["speaker"]), t["text"]) for i, t in enumerate(turns)),
        )

    def to_record(self) -> dict[str, Any]:
        return {
            "id": self.id,
            "domain": self.domain,
            "turns": [{"speaker": t.speaker.value, "text": t.text} for t in self.turns],
        }


_NA_VALUES = frozenset({"", "na", "n/a", "null"})


def is_na(value: Any) -> bool:
    return value is None or (isinstance(value, str) and value.strip().casefold() in _NA_VALUES)


class SlotFrame(Mapping[str, tuple[str, ...]]):
    """Label -> non-empty tuple of values for one text window.

    Labels are canonicalized, scalar values promoted to one-element tuples,
    NA/empty values dropped, exact duplicates removed.
    """

    __slots__ = ("_entries",)

    def __init__(self, entries: Mapping[str, Any] | Iterable[tuple[str, Any]] | None = None):
        items = entries.items() if isinstance(entries, Mapping) else (entries or ())
        merged: dict[str, list[str]] = {}
        for label, values in items:
            if isinstance(values, (str, int, float)) or values is None:
                values = [values]
            for v in values:
                if is_na(v) or isinstance(v, (dict, list)):
                    continue
                v = str(v).strip()
                bucket = merged.setdefault(canonicalize_label(label), [])
                if v not in bucket:
                    bucket.append(v)
        self._entries = {k: tuple(v) for k, v in merged.items() if v}

    def __getitem__(self, label: str) -> tuple[str, ...]:
        return self._entries[label]

    def __iter__(self) -> Iterator[str]:
        return iter(self._entries)

    def __len__(self) -> int:
        return len(self._entries)

    def __eq__(self, other: object) -> bool:
        if isinstance(other, SlotFrame):
            return self._entries == other._entries
        if isinstance(other, Mapping):
            return self == SlotFrame(other)
        return NotImplemented

    def __hash__(self):
        return hash(frozenset(self._entries.items()))

    def __repr__(self) -> str:
        return f"SlotFrame({self.to_dict()!r})"

    def pairs(self) -> list[tuple[str, str]]:
        return [(label, v) for label, values in self._entries.items() for v in values]

    def to_dict(self) -> dict[str, list[str]]:
        return {k: list(v) for k, v in self._entries.items()}

    def restrict(self, labels: Iterable[str]) -> SlotFrame:
        keep = set(labels)
        return SlotFrame({k: v for k, v in self._entries.items() if k in keep})

    def union(self, other: SlotFrame, key: Callable[[str], str] | None = None) -> SlotFrame:
        """Per-label concatenation; values colliding under ``key`` keep the first surface form."""
        key = key or (lambda v: v)
        out: dict[str, list[str]] = {k: list(v) for k, v in self._entries.items()}
        for label, values in other.items():
            bucket = out.setdefault(label, [])
            seen = {key(v) for v in bucket}
            for v in values:
                k = key(v)
                if k not in seen:
                    seen.add(k)
                    bucket.append(v)
        return SlotFrame(out)


def dedup_key(value: str) -> str:
    """Merge/dedup key: ITN-canonical, case-folded, punctuation-stripped."""
    return apply_itn(value).canonical


class Source(str, Enum):
    TEACHER = "teacher"
    HUMAN = "human"


def _sources_to_wire(sources: frozenset[Source]) -> str:
    return "+".join(s.value for s in Source if s in sources)


def _sources_from_wire(raw: str) -> frozenset[Source]:
    try:
        return frozenset(Source(part) for part in raw.split("+"))
    except ValueError:
        raise ValidationError(f"unknown annotation source {raw!r}") from None


@dataclass(frozen=True)
class AnnotatedTranscript:
    transcript: Transcript
    frames: Mapping[int, SlotFrame] = field(default_factory=dict)
    sources: frozenset[Source] = frozenset({Source.TEACHER})

    def __post_init__(self):
        n = len(self.transcript.turns)
        frames = {}
        for idx in sorted(self.frames):
            if not isinstance(idx, int) or not 0 <= idx < n:
                raise ValidationError(f"transcript {self.transcript.id!r}: frame for invalid turn index {idx!r}")
            frame = self.frames[idx]
            frame = frame if isinstance(frame, SlotFrame) else SlotFrame(frame)
            if frame:
                frames[idx] = frame
        object.__setattr__(self, "frames", MappingProxyType(frames))
        object.__setattr__(self, "sources", frozenset(Source(s) for s in self.sources))
        if not self.sources:
            raise ValidationError("annotation needs at least one source")

    @property
    def id(self) -> str:
        return self.transcript.id

    def frame(self, index: int) -> SlotFrame:
        return self.frames.get(index, SlotFrame())

    @classmethod
    def from_record(cls, rec: Mapping[str, Any]) -> AnnotatedTranscript:
        transcript = Transcript.from_record(rec)
        raw_frames = rec.get("frames", {}) or {}
        if not isinstance(raw_frames, Mapping):
            raise ValidationError("'frames' must be an object")
        try:
            frames = {int(k): SlotFrame(v) for k, v in raw_frames.items()}
        except (TypeError, ValueError, AttributeError) as exc:
            raise ValidationError(f"bad frames: {exc}") from None
        return cls(transcript, frames, _sources_from_wire(rec.get("source", "teacher")))

    def to_record(self) -> dict[str, Any]:
        rec = self.transcript.to_record()
        rec["frames"] = {str(k): v.to_dict() for k, v in self.frames.items()}
        rec["source"] = _sources_to_wire(self.sources)
        return rec


@dataclass(frozen=True)
class LineDiagnostic:
    line: int
    message: str

    def __str__(self) -> str:
        return f"line {self.line}: {self.message}"


def _load_jsonl(path: str | Path, build: Callable[[Mapping], Any]) -> tuple[list, list[LineDiagnostic]]:
    items, diagnostics = [], []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
                if not isinstance(rec, Mapping):
                    raise ValidationError("record is not an object")
                items.append(build(rec))
            except json.JSONDecodeError as exc:
                diagnostics.append(LineDiagnostic(lineno, f"invalid JSON: {exc.msg} (col {exc.colno})"))
            except KeyError as exc:
                diagnostics.append(LineDiagnostic(lineno, f"missing field {exc.args[0]!r}"))
            except (ValidationError, ValueError, TypeError) as exc:
                diagnostics.append(LineDiagnostic(lineno, str(exc)))
    return items, diagnostics


def load_transcripts(path: str | Path) -> tuple[list[Transcript], list[LineDiagnostic]]:
    """Read a transcript JSONL file; malformed lines are skipped and reported."""
    return _load_jsonl(path, Transcript.from_record)


def load_annotated(path: str | Path) -> tuple[list[AnnotatedTranscript], list[LineDiagnostic]]:
    return _load_jsonl(path, AnnotatedTranscript.from_record)


def write_jsonl(path: str | Path, records: Iterable[Mapping]) -> int:
    n = 0
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(json.dumps(rec, ensure_ascii=False) + "\n")
            n += 1
    return n


def merge_annotations(teacher: AnnotatedTranscript, human: AnnotatedTranscript) -> AnnotatedTranscript:
    """Per-turn union of two annotations of the same transcript.

    Values for a shared label are deduplicated on their ITN-canonical form;
    the first-seen surface form (``teacher`` side first) is stored.
    """
    if teacher.id != human.id:
        raise ValidationError(f"cannot merge annotations of {teacher.id!r} and {human.id!r}")
    frames = {}
    for idx in sorted(set(teacher.frames) | set(human.frames)):
        frames[idx] = teacher.frame(idx).union(human.frame(idx), key=dedup_key)
    return AnnotatedTranscript(teacher.transcript, frames, teacher.sources | human.sources)
