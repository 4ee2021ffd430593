"""Extractive prefilter: cheap high-recall candidate extraction used to narrow
the label set sent to the generative backend.

Extractor wire contract (compatible with common zero-shot NER servers)::

    POST <url>  {"text": str, "labels": [str, ...]}
    200         {"entities": [{"label", "text", "start", "end", "score"}, ...]}
"""

from __future__ import annotations

import re
from collections.abc import Iterable, Sequence
from dataclasses import dataclass
from typing import Protocol

import httpx

from slotfill.constraints import PATTERN_KIND_PREFIX, PATTERNS
from slotfill.itn import EMAIL_RE
from slotfill.labels import LabelError, canonicalize_label
from slotfill.registry import SlotRegistry


class ExtractorError(RuntimeError):
    pass


@dataclass(frozen=True)
class Candidate:
    label: str
    value: str
    start: int
    end: int
    score: float

    def __post_init__(self):
        if not 0.0 <= self.score <= 1.0:
            raise ValueError(f"candidate score {self.score} outside [0, 1]")
        if not 0 <= self.start <= self.end:
            raise ValueError(f"bad span [{self.start}, {self.end})")

    @property
    def span(self) -> tuple[int, int]:
        return self.start, self.end

    def to_record(self) -> dict:
        return {"label": self.label, "text": self.value, "start": self.start, "end": self.end, "score": self.score}


class Extractor(Protocol):
    def extract(self, text: str, labels: Sequence[str]) -> list[Candidate]: ...


_NUM = (
    r"(?:zero|one|two|three|four|five|six|seven|eight|nine|ten|eleven|twelve|thirteen|fourteen|"
    r"fifteen|sixteen|seventeen|eighteen|nineteen|twenty|thirty|forty|fifty|sixty|seventy|"
    r"eighty|ninety|hundred|thousand)"
)
_ORD = (
    r"(?:first|second|third|fourth|fifth|sixth|seventh|eighth|ninth|tenth|eleventh|twelfth|"
    r"thirteenth|fourteenth|fifteenth|sixteenth|seventeenth|eighteenth|nineteenth|twentieth|"
    r"thirtieth)"
)
_NUM_RUN = rf"{_NUM}(?:(?:[\s-]+|\s+and\s+){_NUM})*"
_MONTH = (
    r"(?:jan(?:uary)?|feb(?:ruary)?|mar(?:ch)?|apr(?:il)?|may|june?|july?|aug(?:ust)?|"
    r"sep(?:t(?:ember)?)?|oct(?:ober)?|nov(?:ember)?|dec(?:ember)?)"
)
_DAY = rf"(?:\d{{1,2}}(?:st|nd|rd|th)?|(?:(?:twenty|thirty)[\s-]+)?{_ORD}|{_NUM_RUN})"
_YEAR = rf"(?:\d{{4}}|{_NUM_RUN})"
_MERIDIEM = r"(?:[ap]\.?\s?m\.?)"
_DURATION_UNIT = r"(?:seconds?|minutes?|hours?|days?|weeks?|months?|years?)"

# kind -> (pattern, score)
_RECOGNIZERS: dict[str, tuple[re.Pattern, float]] = {
    "email": (re.compile(EMAIL_RE.pattern, re.I | re.ASCII), 0.95),
    "money": (
        re.compile(
            rf"\$\s?\d[\d,]*(?:\.\d{{1,2}})?|\b(?:\d[\d,]*(?:\.\d{{1,2}})?|{_NUM_RUN})\s+(?:dollars?|bucks?)\b",
            re.I,
        ),
        0.85,
    ),
    "time": (
        re.compile(
            rf"\b(?:\d{{1,2}}(?::\d{{2}})?|{_NUM_RUN})\s*{_MERIDIEM}(?![a-z])"
            rf"|\b\d{{1,2}}:\d{{2}}\b"
            rf"|\b(?:\d{{1,2}}|{_NUM_RUN})\s+o'?\s?clock\b",
            re.I,
        ),
        0.85,
    ),
    "date": (
        re.compile(
            rf"\b{_MONTH}\.?\s+(?:the\s+)?{_DAY}\b(?:,?\s+{_YEAR}\b)?"
            rf"|\b(?:the\s+)?{_DAY}\s+(?:of\s+)?{_MONTH}\b(?:,?\s+{_YEAR}\b)?"
            rf"|\b\d{{1,2}}/\d{{1,2}}/\d{{2,4}}\b|\b\d{{4}}-\d{{2}}-\d{{2}}\b",
            re.I,
        ),
        0.8,
    ),
    "duration": (re.compile(rf"\b(?:\d+|{_NUM_RUN}|an?)\s+{_DURATION_UNIT}\b", re.I), 0.75),
    "phone": (re.compile(r"(?<![\d-])\+?\d(?:[\d\s().-]{5,}\d)(?![\d-])"), 0.7),
    "number": (re.compile(rf"(?<![\w$.])\d+(?:[.,]\d+)*(?![\w.]*\d)|\b{_NUM_RUN}\b", re.I), 0.6),
    "partial_cardinal": (re.compile(r"\b[a-z]*\d[\w-]*(?:\s+[a-z]{1,12}\b)?", re.I), 0.5),
}


def _phrase_pattern(phrase: str) -> re.Pattern:
    words = [re.escape(w) for w in phrase.split()]
    return re.compile(r"(?<!\w)" + r"\s+".join(words) + r"(?!\w)", re.I)


# Regex constraints double as recognizers, matched against the surface text.
for _pid, _pat in PATTERNS.items():
    _RECOGNIZERS.setdefault(
        PATTERN_KIND_PREFIX + _pid, (re.compile(rf"(?<![\w@.-])(?:{_pat.pattern})(?![\w@-])", re.I), 0.6)
    )


def _recognize(kind: str, text: str) -> Iterable[tuple[str, int, int, float]]:
    pattern, score = _RECOGNIZERS[kind]
    for m in pattern.finditer(text):
        value = m.group(0)
        stripped = value.rstrip(" ,.-")
        if not stripped:
            continue
        if kind == "phone" and sum(c.isdigit() for c in stripped) < 7:
            continue
        yield stripped, m.start(), m.start() + len(stripped), score


class ReferenceExtractor:
    """Rule-based extractor: entity-kind recognizers routed to labels through
    each label's constraint kinds, plus per-label gazetteers."""

    def __init__(self, registry: SlotRegistry):
        self.registry = registry

    def extract(self, text: str, labels: Sequence[str] | None = None) -> list[Candidate]:
        if not text:
            return []
        wanted = None if labels is None else {canonicalize_label(x) for x in labels}
        pooled: dict[str, list[str]] = {}
        for r in self.registry:
            for kind in r.entity_kinds:
                pooled.setdefault(kind, []).extend(r.gazetteer)
        kind_hits: dict[str, list[tuple[str, int, int, float]]] = {}
        out: list[Candidate] = []
        seen = set()
        for record in self.registry:
            if wanted is not None and record.canonical not in wanted:
                continue
            hits: list[tuple[str, int, int, float]] = []
            for kind in sorted(record.entity_kinds):
                if kind in _RECOGNIZERS:
                    if kind not in kind_hits:
                        kind_hits[kind] = list(_recognize(kind, text))
                    hits.extend(kind_hits[kind])
                else:
                    # named-entity kinds degrade to gazetteer lookups
                    hits.extend(self._gazetteer_hits(text, pooled.get(kind, ())))
            hits.extend(self._gazetteer_hits(text, record.gazetteer))
            for value, start, end, score in hits:
                key = (record.canonical, start, end)
                if key not in seen:
                    seen.add(key)
                    out.append(Candidate(record.canonical, value, start, end, score))
        out.sort(key=lambda c: (c.start, c.end, c.label))
        return out

    @staticmethod
    def _gazetteer_hits(text: str, phrases: Iterable[str]) -> Iterable[tuple[str, int, int, float]]:
        for phrase in dict.fromkeys(phrases):
            if not phrase.strip():
                continue
            for m in _phrase_pattern(phrase).finditer(text):
                yield m.group(0), m.start(), m.end(), 0.9


class HttpExtractor:
    """Client for a remote extractor service."""

    def __init__(self, url: str, timeout: float = 10.0, client: httpx.Client | None = None):
        self.url = url
        self._client = client or httpx.Client(timeout=timeout)

    def extract(self, text: str, labels: Sequence[str]) -> list[Candidate]:
        try:
            resp = self._client.post(self.url, json={"text": text, "labels": list(labels)})
        except httpx.TransportError as exc:
            raise ExtractorError(f"extractor unreachable at {self.url}: {exc}") from exc
        if resp.status_code != 200:
            raise ExtractorError(f"extractor returned HTTP {resp.status_code}: {resp.text[:200]}")
        try:
            entities = resp.json()["entities"]
        except (ValueError, KeyError, TypeError):
            raise ExtractorError(f"malformed extractor response: {resp.text[:200]!r}") from None
        out = []
        for ent in entities:
            try:
                start, end = int(ent["start"]), int(ent["end"])
                value = str(ent.get("text", text[start:end]))
                if text[start:end] != value:
                    # re-anchor misaligned spans on the first exact occurrence
                    start = text.find(value)
                    if start < 0:
                        continue
                    end = start + len(value)
                score = min(1.0, max(0.0, float(ent.get("score", 1.0))))
                out.append(Candidate(canonicalize_label(ent["label"]), value, start, end, score))
            except (KeyError, TypeError, ValueError, LabelError):
                continue
        return out


def extract_candidates(
    text: str,
    registry: SlotRegistry,
    extractor: Extractor | None = None,
    labels: Sequence[str] | None = None,
    min_score: float = 0.0,
) -> list[Candidate]:
    """Candidates from ``extractor`` (default: the reference extractor) with score >= ``min_score``."""
    if not text:
        return []
    extractor = extractor or ReferenceExtractor(registry)
    found = extractor.extract(text, labels if labels is not None else registry.labels())
    return [c for c in found if c.score >= min_score]


def _collapse(text: str) -> str:
    return " ".join(text.casefold().split())


def detect_abstractive(context_plus_text: str, registry: SlotRegistry) -> set[str]:
    """Abstractive labels with at least one trigger phrase present (case-insensitive)."""
    haystack = _collapse(context_plus_text)
    return {
        r.canonical
        for r in registry.abstractive()
        if any(_collapse(t) and _collapse(t) in haystack for t in r.triggers)
    }


def narrow_labels(requested: Sequence[str], candidates: Iterable[Candidate], abstractive_hits: Iterable[str]) -> list[str]:
    """``requested`` ∩ (candidate labels ∪ abstractive hits), in ``requested`` order."""
    proposed = {c.label for c in candidates} | set(abstractive_hits)
    return [label for label in requested if label in proposed]
