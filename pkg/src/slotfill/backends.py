"""Generation backends.

Wire contract for the HTTP backend::

    POST <url>  {"prompt": str, "max_tokens": int, "temperature": float}
    200         {"text": str}

Replay, oracle and noisy-mock backends speak the same Python interface and
exist so the teacher loop and the online pipeline can run offline.
"""

from __future__ import annotations

import hashlib
import json
import random
import re
from collections.abc import Iterable, Mapping
from pathlib import Path
from typing import Protocol, runtime_checkable

import httpx

from slotfill.constraints import check
from slotfill.model import AnnotatedTranscript, SlotFrame
from slotfill.registry import SlotRegistry
from slotfill.templates import PROMPT_CLOSE

DEFAULT_MAX_TOKENS = 512
DEFAULT_TEMPERATURE = 0.0


class BackendError(RuntimeError):
    """Transport or protocol failure talking to a backend."""


@runtime_checkable
class GenerationBackend(Protocol):
    def generate(self, prompt: str, max_tokens: int = DEFAULT_MAX_TOKENS, temperature: float = DEFAULT_TEMPERATURE) -> str: ...


def prompt_hash(prompt: str) -> str:
    return hashlib.sha256(prompt.encode("utf-8")).hexdigest()


class HttpGenerationBackend:
    """Client for a remote serving endpoint. Retries once on transport errors."""

    def __init__(self, url: str, timeout: float = 10.0, retries: int = 1, client: httpx.Client | None = None):
        self.url = url
        self.retries = retries
        self._client = client or httpx.Client(timeout=timeout)

    def generate(self, prompt: str, max_tokens: int = DEFAULT_MAX_TOKENS, temperature: float = DEFAULT_TEMPERATURE) -> str:
        payload = {"prompt": prompt, "max_tokens": max_tokens, "temperature": temperature}
        last: Exception | None = None
        for _ in range(self.retries + 1):
            try:
                resp = self._client.post(self.url, json=payload)
            except httpx.TransportError as exc:
                last = exc
                continue
            if resp.status_code != 200:
                raise BackendError(f"generation backend returned HTTP {resp.status_code}: {resp.text[:200]}")
            try:
                body = resp.json()
                return str(body["text"])
            except (ValueError, KeyError, TypeError):
                raise BackendError(f"malformed generation response: {resp.text[:200]!r}") from None
        raise BackendError(f"generation backend unreachable at {self.url}: {last}")

    def close(self) -> None:
        self._client.close()


class ReplayBackend:
    """Serves canned responses from a ``{sha256(prompt): text}`` fixture."""

    def __init__(self, responses: Mapping[str, str]):
        self.responses = dict(responses)
        self.calls = 0

    @classmethod
    def load(cls, path: str | Path) -> ReplayBackend:
        with open(path, encoding="utf-8") as fh:
            return cls(json.load(fh))

    @classmethod
    def from_prompts(cls, pairs: Iterable[tuple[str, str]]) -> ReplayBackend:
        return cls({prompt_hash(p): text for p, text in pairs})

    def generate(self, prompt: str, max_tokens: int = DEFAULT_MAX_TOKENS, temperature: float = DEFAULT_TEMPERATURE) -> str:
        self.calls += 1
        try:
            return self.responses[prompt_hash(prompt)]
        except KeyError:
            raise BackendError(f"no replay fixture for prompt {prompt_hash(prompt)[:12]}") from None


_LABELS_RE = re.compile(r"delimited by triple backticks: (.*?)\. Format your response", re.S)
_MAIN_TEXT_RE = re.compile(r"```\nMain text: (.*?)\n```", re.S)


def read_query_prompt(prompt: str) -> tuple[list[str], str]:
    """Recover (requested labels, main text) from a rendered query prompt."""
    labels_m = _LABELS_RE.search(prompt)
    text_m = _MAIN_TEXT_RE.search(prompt.split(PROMPT_CLOSE)[0])
    if not labels_m or not text_m:
        raise BackendError("prompt does not follow the extraction template")
    labels = [x.strip() for x in labels_m.group(1).split(", ") if x.strip()]
    return labels, text_m.group(1)


class OracleBackend:
    """Answers with the gold frame of the main text, restricted to the requested labels."""

    def __init__(self, corpus: Iterable[AnnotatedTranscript]):
        self.gold: dict[str, SlotFrame] = {}
        for doc in corpus:
            for turn in doc.transcript.turns:
                key = f"{turn.speaker.title}: {turn.text}"
                self.gold[key] = self.gold.get(key, SlotFrame()).union(doc.frame(turn.index))
        self.calls = 0

    def answer(self, prompt: str) -> dict[str, list[str]]:
        labels, main_text = read_query_prompt(prompt)
        frame = SlotFrame()
        for line in main_text.split("\n"):
            frame = frame.union(self.gold.get(line, SlotFrame()))
        return frame.restrict(labels).to_dict()

    def generate(self, prompt: str, max_tokens: int = DEFAULT_MAX_TOKENS, temperature: float = DEFAULT_TEMPERATURE) -> str:
        self.calls += 1
        return json.dumps(self.answer(prompt), ensure_ascii=False)


# Spurious values that violate common constraint kinds.
_SPURIOUS = ("my account", "the usual", "not sure", "whatever you have on file", "something like that")


class NoisyMockBackend(OracleBackend):
    """Oracle answers plus injected spurious values.

    For each requested label that carries constraints, with probability
    ``rate`` a phrase from a fixed pool that fails at least one of the label's
    constraints is appended. Draws are keyed on the prompt hash and the seed, so identical
    prompts get identical noise.
    """

    def __init__(self, corpus: Iterable[AnnotatedTranscript], registry: SlotRegistry, rate: float = 0.3, seed: int = 0):
        super().__init__(corpus)
        self.registry = registry
        self.rate = rate
        self.seed = seed

    def generate(self, prompt: str, max_tokens: int = DEFAULT_MAX_TOKENS, temperature: float = DEFAULT_TEMPERATURE) -> str:
        self.calls += 1
        answer = self.answer(prompt)
        labels, _ = read_query_prompt(prompt)
        rng = random.Random(f"{self.seed}|{prompt_hash(prompt)}")
        for label in labels:
            record = self.registry.get(label)
            if record is None or not record.constraints:
                continue
            if rng.random() < self.rate:
                pool = list(_SPURIOUS)
                rng.shuffle(pool)
                gazetteers = self.registry.kind_gazetteers()
                for value in pool:
                    if not all(check(value, r, gazetteers).passed for r in record.constraints):
                        answer.setdefault(record.canonical, []).append(value)
                        break
        return json.dumps(answer, ensure_ascii=False)
