"""Instruction fine-tuning dataset from annotated transcripts.

Each sample anchors on one turn: the text window ends at the anchor, a
context window precedes it, and the label list mixes the labels present in
the text window with distractor labels that are absent from it, so the
student learns both extraction and abstention.
"""

from __future__ import annotations

import hashlib
import json
import random
from collections import Counter
from collections.abc import Iterable, Iterator, Mapping, Sequence
from dataclasses import dataclass, field

from slotfill.model import AnnotatedTranscript, SlotFrame, Turn
from slotfill.registry import SlotRegistry
from slotfill.templates import render_instruction, render_prompt

DISTRACTOR_SCOPES = ("global", "domain")


class GenConfigError(ValueError):
    pass


def _check_range(name: str, rng: tuple[int, int], low: int) -> tuple[int, int]:
    lo, hi = (int(x) for x in rng)
    if lo < low or hi < lo:
        raise GenConfigError(f"{name} must satisfy {low} <= min <= max, got [{lo}, {hi}]")
    return lo, hi


@dataclass(frozen=True)
class GenConfig:
    seed: int = 0
    context_len_range: tuple[int, int] = (0, 6)
    text_len_range: tuple[int, int] = (1, 3)
    distractor_count_range: tuple[int, int] = (1, 5)
    samples_per_turn: int = 2
    include_unannotated: bool = False
    distractor_scope: str = "global"

    def __post_init__(self):
        object.__setattr__(self, "context_len_range", _check_range("context_len_range", self.context_len_range, 0))
        object.__setattr__(self, "text_len_range", _check_range("text_len_range", self.text_len_range, 1))
        object.__setattr__(
            self, "distractor_count_range", _check_range("distractor_count_range", self.distractor_count_range, 0)
        )
        if self.samples_per_turn < 1:
            raise GenConfigError(f"samples_per_turn must be >= 1, got {self.samples_per_turn}")
        if self.distractor_scope not in DISTRACTOR_SCOPES:
            raise GenConfigError(f"distractor_scope must be one of {DISTRACTOR_SCOPES}, got {self.distractor_scope!r}")


@dataclass(frozen=True)
class InstructionSample:
    transcript_id: str
    anchor: int
    draw: int
    domain: str
    context_turns: tuple[Turn, ...]
    text_turns: tuple[Turn, ...]
    target_labels: tuple[str, ...]
    distractor_labels: tuple[str, ...]
    prompt_labels: tuple[str, ...]
    completion: SlotFrame
    warnings: tuple[str, ...] = ()

    @property
    def instruction(self) -> str:
        return render_instruction(self.context_turns, self.text_turns, self.prompt_labels)

    @property
    def response(self) -> str:
        return json.dumps(self.completion.to_dict(), ensure_ascii=False)

    @property
    def rendered(self) -> str:
        return render_prompt(self.instruction, self.response)

    def to_record(self) -> dict[str, str]:
        return {"instruction": self.instruction, "response": self.response}


def sample_rng(seed: int, transcript_id: str, anchor: int, draw: int) -> random.Random:
    """Independent stream per (seed, transcript, anchor, draw); no shared state."""
    key = json.dumps([seed, transcript_id, anchor, draw]).encode("utf-8")
    return random.Random(int.from_bytes(hashlib.sha256(key).digest()[:16], "big"))


def build_sample(
    annotated: AnnotatedTranscript,
    anchor: int,
    config: GenConfig,
    draw: int,
    registry: SlotRegistry,
    pool: Sequence[str] | None = None,
) -> InstructionSample:
    """One training sample anchored on turn ``anchor``.

    ``pool`` overrides the distractor universe (defaults to every registry
    label). Distractors always exclude labels present in the text window.
    """
    turns = annotated.transcript.turns
    if not 0 <= anchor < len(turns):
        raise IndexError(f"anchor {anchor} outside transcript {annotated.id!r} with {len(turns)} turns")
    rng = sample_rng(config.seed, annotated.id, anchor, draw)
    text_len = rng.randint(*config.text_len_range)
    context_len = rng.randint(*config.context_len_range)
    n_distractors = rng.randint(*config.distractor_count_range)

    text_start = max(0, anchor - text_len + 1)
    context_start = max(0, text_start - context_len)
    text_turns = turns[text_start : anchor + 1]
    context_turns = turns[context_start:text_start]

    completion = SlotFrame()
    for t in text_turns:
        completion = completion.union(annotated.frame(t.index))
    targets = tuple(completion)

    universe = registry.labels() if pool is None else list(pool)
    eligible = sorted(set(universe) - set(targets))
    warnings = []
    if len(eligible) < n_distractors:
        warnings.append(
            f"{annotated.id}:{anchor}: wanted {n_distractors} distractors, only {len(eligible)} eligible"
        )
        n_distractors = len(eligible)
    distractors = tuple(rng.sample(eligible, n_distractors))
    prompt_labels = list(targets + distractors)
    rng.shuffle(prompt_labels)

    return InstructionSample(
        transcript_id=annotated.id,
        anchor=anchor,
        draw=draw,
        domain=annotated.transcript.domain,
        context_turns=tuple(context_turns),
        text_turns=tuple(text_turns),
        target_labels=targets,
        distractor_labels=distractors,
        prompt_labels=tuple(prompt_labels),
        completion=completion,
        warnings=tuple(warnings),
    )


@dataclass
class DatasetStats:
    samples: int = 0
    warnings: int = 0
    errors: int = 0
    label_histogram: Counter = field(default_factory=Counter)
    messages: list[str] = field(default_factory=list)

    def observe(self, sample: InstructionSample) -> None:
        self.samples += 1
        self.warnings += len(sample.warnings)
        self.messages.extend(sample.warnings)
        self.label_histogram.update(sample.target_labels)

    def to_record(self) -> dict:
        return {
            "samples": self.samples,
            "warnings": self.warnings,
            "errors": self.errors,
            "label_histogram": dict(sorted(self.label_histogram.items())),
        }


def _domain_pools(corpus: Iterable[AnnotatedTranscript]) -> Mapping[str, list[str]]:
    pools: dict[str, set[str]] = {}
    for doc in corpus:
        labels = pools.setdefault(doc.transcript.domain, set())
        for frame in doc.frames.values():
            labels.update(frame)
    return {d: sorted(v) for d, v in pools.items()}


def generate_dataset(
    corpus: Sequence[AnnotatedTranscript],
    config: GenConfig,
    registry: SlotRegistry,
    stats: DatasetStats | None = None,
) -> Iterator[InstructionSample]:
    """Samples in (transcript, anchor, draw) order.

    Anchors are the annotated turns, or every turn with
    ``config.include_unannotated``. A failing anchor is counted in
    ``stats.errors`` and skipped; the stream continues.
    """
    if not corpus:
        raise ValueError("corpus is empty")
    stats = stats if stats is not None else DatasetStats()
    pools = _domain_pools(corpus) if config.distractor_scope == "domain" else None
    for doc in corpus:
        anchors = range(len(doc.transcript.turns)) if config.include_unannotated else sorted(doc.frames)
        pool = None if pools is None else pools.get(doc.transcript.domain, [])
        for anchor in anchors:
            for draw in range(config.samples_per_turn):
                try:
                    sample = build_sample(doc, anchor, config, draw, registry, pool)
                except Exception as exc:  # one bad turn never aborts the stream
                    stats.errors += 1
                    stats.messages.append(f"{doc.id}:{anchor}: {exc}")
                    continue
                stats.observe(sample)
                yield sample
