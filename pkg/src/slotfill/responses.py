"""Parsing of generated JSON-ish responses, with a repair ladder for the usual
ways small models break JSON (prose wrappers, single quotes, trailing commas,
no braces at all)."""

from __future__ import annotations

import json
import re
from typing import Any

from slotfill.model import SlotFrame


class UnparseableResponseError(ValueError):
    def __init__(self, raw: str, message: str = "could not parse model response"):
        super().__init__(f"{message}: {raw[:200]!r}")
        self.raw = raw


_TRAILING_COMMA_RE = re.compile(r",\s*([}\]])")
_PY_LITERALS = {"None": "null", "True": "true", "False": "false"}
_SALVAGE_LINE_RE = re.compile(r"""^\s*[-*]?\s*["']?([^"':{}\[\]]+?)["']?\s*:\s*(.+?)\s*,?\s*$""")


def balanced_objects(text: str) -> list[str]:
    """Every top-level brace-balanced ``{...}`` substring, string-literal aware."""
    out = []
    depth = 0
    start = None
    quote = None
    escaped = False
    for i, c in enumerate(text):
        if quote:
            if escaped:
                escaped = False
            elif c == "\\":
                escaped = True
            elif c == quote:
                quote = None
            continue
        if c == '"' and depth > 0:
            quote = c
        elif c == "{":
            if depth == 0:
                start = i
            depth += 1
        elif c == "}" and depth > 0:
            depth -= 1
            if depth == 0:
                out.append(text[start : i + 1])
    return out


def _single_to_double_quotes(text: str) -> str:
    """Swap single-quoted JSON strings for double-quoted ones, leaving apostrophes inside words."""
    out = []
    i = 0
    in_double = False
    while i < len(text):
        c = text[i]
        if c == '"' and (i == 0 or text[i - 1] != "\\"):
            in_double = not in_double
            out.append(c)
        elif c == "'" and not in_double and (i == 0 or not text[i - 1].isalnum()):
            # opening quote: scan to the closing quote that precedes a JSON delimiter
            j = i + 1
            while j < len(text):
                if text[j] == "'" and re.match(r"\s*[:,}\]]", text[j + 1 :]):
                    break
                j += 1
            if j >= len(text):
                out.append(c)
            else:
                body = text[i + 1 : j].replace('"', '\\"')
                out.append(f'"{body}"')
                i = j
        else:
            out.append(c)
        i += 1
    return "".join(out)


def _normalize_jsonish(text: str) -> str:
    text = _single_to_double_quotes(text)
    text = _TRAILING_COMMA_RE.sub(r"\1", text)
    return re.sub(r"\b(None|True|False)\b", lambda m: _PY_LITERALS[m.group(1)], text)


def _loads_object(text: str) -> dict | None:
    try:
        obj = json.loads(text)
    except (json.JSONDecodeError, RecursionError):
        return None
    return obj if isinstance(obj, dict) else None


def repair_json_object(raw: str) -> tuple[dict, int]:
    """Parse a JSON object out of ``raw``; returns (object, rung used 1-3).

    1. strict parse; 2. longest brace-balanced substring; 3. quote and
    trailing-comma normalization, retried on the whole text and on each
    balanced substring.
    """
    obj = _loads_object(raw.strip())
    if obj is not None:
        return obj, 1
    candidates = sorted(balanced_objects(raw), key=len, reverse=True)
    for cand in candidates:
        obj = _loads_object(cand)
        if obj is not None:
            return obj, 2
    for cand in [raw.strip(), *candidates]:
        obj = _loads_object(_normalize_jsonish(cand))
        if obj is not None:
            return obj, 3
    raise UnparseableResponseError(raw)


def _salvage_value(text: str) -> Any:
    text = text.strip()
    if text.startswith("["):
        try:
            parsed = json.loads(_normalize_jsonish(text))
            if isinstance(parsed, list):
                return parsed
        except json.JSONDecodeError:
            pass
    return text.strip("\"'")


def salvage_lines(raw: str) -> dict[str, Any]:
    """Rung 4: ``label: value`` lines."""
    out: dict[str, Any] = {}
    for line in raw.splitlines():
        m = _SALVAGE_LINE_RE.match(line)
        if m:
            out.setdefault(m.group(1).strip(), _salvage_value(m.group(2)))
    return out


def parse_model_response(raw: str) -> SlotFrame:
    """Parse a label -> value(s) object from generated text.

    NA/N-A/null/empty values are dropped and scalar values promoted to lists.
    Raises :class:`UnparseableResponseError` when every repair rung fails.
    """
    try:
        obj, _ = repair_json_object(raw)
    except UnparseableResponseError:
        obj = salvage_lines(raw)
        if not obj:
            raise
    try:
        return SlotFrame({k: v for k, v in obj.items() if isinstance(k, str) and k.strip()})
    except ValueError as exc:
        raise UnparseableResponseError(raw, str(exc)) from None
