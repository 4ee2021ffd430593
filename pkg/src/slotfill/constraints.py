"""Constraint engine for post-extraction filtering.

A label carries zero or more rules; a value survives only if it passes all of
them. Rules are evaluated on the ITN-canonical form of the value.

Config records (inside a registry seed entry's ``"constraints"`` list)::

    {"type": "entity_kind", "kind": "cardinal"}
    {"type": "length", "min": 6, "max": 12}
    {"type": "token_count", "min": 1, "max": 4}
    {"type": "partial_cardinal"}
    {"type": "regex", "pattern": "digits"}
    {"type": "all_of", "rules": [...]}
    {"type": "any_of", "rules": [...]}
"""

from __future__ import annotations

import re
from collections.abc import Iterable, Mapping
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Union

from slotfill.itn import EMAIL_RE, NormalizedValue, apply_itn

if TYPE_CHECKING:
    from slotfill.model import SlotFrame
    from slotfill.registry import SlotRegistry


class ConstraintConfigError(ValueError):
    pass


KIND_ALIASES = {"cardinal": "number", "organisation": "organization", "org": "organization"}
ITN_KINDS = frozenset({"time", "date", "number", "money", "duration", "email", "plain"})
# Kinds with no ITN recognizer: phone has a pattern, the named-entity kinds need a gazetteer.
EXTENDED_KINDS = frozenset({"phone", "person", "location", "organization"})

_PHONE_RE = re.compile(r"\+?[0-9](?:[0-9\- ]*[0-9])?")

PATTERNS: dict[str, re.Pattern] = {
    "digits": re.compile(r"[0-9]+"),
    "alphanumeric": re.compile(r"[a-z0-9]+(?: [a-z0-9]+)*"),
    "alphanumeric_id": re.compile(r"(?=[a-z0-9]*[0-9])(?=[a-z0-9]*[a-z])[a-z0-9]+"),
    "us_zip": re.compile(r"[0-9]{5}(?:-[0-9]{4})?"),
    "email": re.compile(EMAIL_RE.pattern, re.ASCII),
    "phone": _PHONE_RE,
}


PATTERN_KIND_PREFIX = "pattern:"


def canonical_kind(kind: str) -> str:
    kind = kind.strip().lower()
    kind = KIND_ALIASES.get(kind, kind)
    if kind not in ITN_KINDS | EXTENDED_KINDS:
        raise ConstraintConfigError(f"unknown entity kind {kind!r}")
    return kind


def _is_phone(canonical: str) -> bool:
    return bool(_PHONE_RE.fullmatch(canonical)) and sum(c.isdigit() for c in canonical) >= 7


# predicates return None on pass, a failure reason otherwise


@dataclass(frozen=True)
class EntityKindIs:
    kind: str

    def failure(self, value: NormalizedValue, gazetteers: Mapping[str, frozenset[str]]) -> str | None:
        if self.kind in value.kinds:
            return None
        if self.kind == "phone" and _is_phone(value.canonical):
            return None
        if value.canonical in gazetteers.get(self.kind, ()):
            return None
        found = ", ".join(sorted(value.kinds))
        return f"expected entity kind {self.kind!r}, found {{{found}}}"

    def to_config(self) -> dict:
        return {"type": "entity_kind", "kind": self.kind}


@dataclass(frozen=True)
class LengthBetween:
    min: int
    max: int

    def __post_init__(self):
        if not 0 <= self.min <= self.max:
            raise ConstraintConfigError(f"length bounds must satisfy 0 <= min <= max, got [{self.min}, {self.max}]")

    def failure(self, value, gazetteers) -> str | None:
        n = len(value.canonical)
        if self.min <= n <= self.max:
            return None
        return f"length {n} outside [{self.min}, {self.max}]"

    def to_config(self) -> dict:
        return {"type": "length", "min": self.min, "max": self.max}


@dataclass(frozen=True)
class TokenCountBetween:
    min: int
    max: int

    def __post_init__(self):
        if not 0 <= self.min <= self.max:
            raise ConstraintConfigError(f"token bounds must satisfy 0 <= min <= max, got [{self.min}, {self.max}]")

    def failure(self, value, gazetteers) -> str | None:
        n = len(value.canonical.split())
        if self.min <= n <= self.max:
            return None
        return f"token count {n} outside [{self.min}, {self.max}]"

    def to_config(self) -> dict:
        return {"type": "token_count", "min": self.min, "max": self.max}


@dataclass(frozen=True)
class PartialCardinal:
    """At least one whitespace token of the canonical form is a pure digit run."""

    def failure(self, value, gazetteers) -> str | None:
        if any(t.isascii() and t.isdigit() for t in value.canonical.split()):
            return None
        return "no numeric token (partial cardinal required)"

    def to_config(self) -> dict:
        return {"type": "partial_cardinal"}


@dataclass(frozen=True)
class Regexlike:
    pattern_id: str

    def __post_init__(self):
        if self.pattern_id not in PATTERNS:
            raise ConstraintConfigError(f"unknown pattern id {self.pattern_id!r}; known: {sorted(PATTERNS)}")

    def failure(self, value, gazetteers) -> str | None:
        if PATTERNS[self.pattern_id].fullmatch(value.canonical):
            return None
        return f"does not match pattern {self.pattern_id!r}"

    def to_config(self) -> dict:
        return {"type": "regex", "pattern": self.pattern_id}


@dataclass(frozen=True)
class AllOf:
    parts: tuple[Predicate, ...]

    def __post_init__(self):
        if not self.parts:
            raise ConstraintConfigError("all_of needs at least one rule")

    def failure(self, value, gazetteers) -> str | None:
        for p in self.parts:
            reason = p.failure(value, gazetteers)
            if reason is not None:
                return reason
        return None

    def to_config(self) -> dict:
        return {"type": "all_of", "rules": [p.to_config() for p in self.parts]}


@dataclass(frozen=True)
class AnyOf:
    parts: tuple[Predicate, ...]

    def __post_init__(self):
        if not self.parts:
            raise ConstraintConfigError("any_of needs at least one rule")

    def failure(self, value, gazetteers) -> str | None:
        reasons = []
        for p in self.parts:
            reason = p.failure(value, gazetteers)
            if reason is None:
                return None
            reasons.append(reason)
        return "none of: " + "; ".join(reasons)

    def to_config(self) -> dict:
        return {"type": "any_of", "rules": [p.to_config() for p in self.parts]}


Predicate = Union[EntityKindIs, LengthBetween, TokenCountBetween, PartialCardinal, Regexlike, AllOf, AnyOf]


@dataclass(frozen=True)
class Predefined:
    kind: str


@dataclass(frozen=True)
class UserDefined:
    label: str


@dataclass(frozen=True)
class ConstraintRule:
    id: str
    scope: Predefined | UserDefined
    predicate: Predicate

    def to_config(self) -> dict:
        return self.predicate.to_config()


@dataclass(frozen=True)
class ConstraintVerdict:
    value: str
    rule_id: str
    passed: bool
    reason: str = field(default="")

    def __post_init__(self):
        if not self.passed and not self.reason:
            raise ValueError("a failing verdict needs a reason")

    def to_record(self) -> dict:
        return {"value": self.value, "rule_id": self.rule_id, "passed": self.passed, "reason": self.reason}


def parse_predicate(obj: Mapping) -> Predicate:
    if not isinstance(obj, Mapping) or "type" not in obj:
        raise ConstraintConfigError(f"constraint must be an object with a 'type' field: {obj!r}")
    kind = obj["type"]
    try:
        if kind == "entity_kind":
            return EntityKindIs(canonical_kind(obj["kind"]))
        if kind == "length":
            return LengthBetween(int(obj.get("min", 0)), int(obj["max"]))
        if kind == "token_count":
            return TokenCountBetween(int(obj.get("min", 0)), int(obj["max"]))
        if kind == "partial_cardinal":
            return PartialCardinal()
        if kind == "regex":
            return Regexlike(obj["pattern"])
        if kind in ("all_of", "any_of"):
            parts = tuple(parse_predicate(p) for p in obj.get("rules", ()))
            return AllOf(parts) if kind == "all_of" else AnyOf(parts)
    except KeyError as exc:
        raise ConstraintConfigError(f"constraint {kind!r} missing field {exc.args[0]!r}") from None
    raise ConstraintConfigError(f"unknown constraint type {kind!r}")


def parse_rule(obj: Mapping, label: str, index: int) -> ConstraintRule:
    predicate = parse_predicate(obj)
    if isinstance(predicate, EntityKindIs):
        scope: Predefined | UserDefined = Predefined(predicate.kind)
        rule_id = f"kind:{predicate.kind}"
    else:
        scope = UserDefined(label)
        rule_id = f"{label}#{index}:{obj['type']}"
    return ConstraintRule(obj.get("id", rule_id), scope, predicate)


def parse_rules(objs: Iterable[Mapping], label: str) -> tuple[ConstraintRule, ...]:
    return tuple(parse_rule(o, label, i) for i, o in enumerate(objs))


def kinds_of(predicate: Predicate) -> set[str]:
    """Entity kinds a predicate accepts; used to route extractor hits to labels."""
    if isinstance(predicate, EntityKindIs):
        return {predicate.kind}
    if isinstance(predicate, PartialCardinal):
        return {"partial_cardinal"}
    if isinstance(predicate, Regexlike):
        return {f"{PATTERN_KIND_PREFIX}{predicate.pattern_id}"}
    if isinstance(predicate, (AllOf, AnyOf)):
        return set().union(*(kinds_of(p) for p in predicate.parts))
    return set()


def check(
    value: NormalizedValue | str,
    rule: ConstraintRule,
    gazetteers: Mapping[str, frozenset[str]] | None = None,
) -> ConstraintVerdict:
    """Evaluate one rule against one value."""
    if isinstance(value, str):
        value = apply_itn(value)
    reason = rule.predicate.failure(value, gazetteers or {})
    if reason is None:
        return ConstraintVerdict(value.surface, rule.id, True, "ok")
    return ConstraintVerdict(value.surface, rule.id, False, reason)


NO_CONSTRAINTS = "unconstrained"


def filter_frame(
    frame: SlotFrame,
    registry: SlotRegistry,
    normalized: Mapping[str, NormalizedValue] | None = None,
) -> tuple[SlotFrame, list[ConstraintVerdict]]:
    """Keep each value iff it passes every rule attached to its label.

    Labels the registry does not know are kept (open world). ``normalized``
    may carry precomputed ITN results keyed by surface value.
    """
    from slotfill.model import SlotFrame

    normalized = normalized or {}
    gazetteers = registry.kind_gazetteers()
    kept: dict[str, list[str]] = {}
    verdicts: list[ConstraintVerdict] = []
    for label, values in frame.items():
        record = registry.get(label)
        rules = record.constraints if record is not None else ()
        for v in values:
            if not rules:
                verdicts.append(ConstraintVerdict(v, NO_CONSTRAINTS, True, "no constraints"))
                kept.setdefault(label, []).append(v)
                continue
            nv = normalized.get(v) or apply_itn(v)
            results = [check(nv, r, gazetteers) for r in rules]
            verdicts.extend(results)
            if all(r.passed for r in results):
                kept.setdefault(label, []).append(v)
    return SlotFrame(kept), verdicts
