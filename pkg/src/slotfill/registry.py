"""Registry of canonical slot labels grown by slot induction.

Seed/persist format is a JSON list of records::

    {"label": "Account Number", "kind": "extractive",
     "constraints": [{"type": "entity_kind", "kind": "cardinal"}],
     "triggers": [], "gazetteer": [], "aliases": ["account number"]}

``gazetteer`` and ``aliases`` are optional.
"""

from __future__ import annotations

import json
import threading
from collections.abc import Iterable, Iterator, Mapping
from dataclasses import dataclass, replace
from enum import Enum
from pathlib import Path

from slotfill.constraints import (
    EXTENDED_KINDS,
    ConstraintRule,
    EntityKindIs,
    kinds_of,
    parse_rules,
)
from slotfill.itn import apply_itn
from slotfill.labels import LabelError, canonicalize_label

__all__ = [
    "LabelError",
    "RegistryConflictError",
    "SlotKind",
    "SlotLabelRecord",
    "SlotRegistry",
    "canonicalize_label",
]


class SlotKind(str, Enum):
    EXTRACTIVE = "extractive"
    ABSTRACTIVE = "abstractive"


class RegistryConflictError(ValueError):
    pass


@dataclass(frozen=True)
class SlotLabelRecord:
    canonical: str
    kind: SlotKind = SlotKind.EXTRACTIVE
    aliases: frozenset[str] = frozenset()
    constraints: tuple[ConstraintRule, ...] = ()
    triggers: tuple[str, ...] = ()
    gazetteer: tuple[str, ...] = ()

    def __post_init__(self):
        if self.kind is SlotKind.EXTRACTIVE and self.triggers:
            raise ValueError(f"extractive label {self.canonical!r} cannot have triggers")

    @property
    def entity_kinds(self) -> set[str]:
        return set().union(*(kinds_of(r.predicate) for r in self.constraints))

    def to_config(self) -> dict:
        out = {
            "label": self.canonical,
            "kind": self.kind.value,
            "constraints": [r.to_config() for r in self.constraints],
            "triggers": list(self.triggers),
        }
        if self.gazetteer:
            out["gazetteer"] = list(self.gazetteer)
        aliases = sorted(self.aliases - {self.canonical})
        if aliases:
            out["aliases"] = aliases
        return out


def _merged(old: tuple, new: Iterable) -> tuple:
    out = list(old)
    out.extend(x for x in new if x not in out)
    return tuple(out)


class SlotRegistry:
    """Label records keyed by canonical form.

    Reads go against an immutable record snapshot; writes take a lock and
    swap whole records in, so readers never see a half-registered label.
    """

    def __init__(self, records: Iterable[SlotLabelRecord] = ()):
        self._lock = threading.Lock()
        self._records: dict[str, SlotLabelRecord] = {}
        for r in records:
            self._records[r.canonical] = r
        self._gazetteer_cache: dict[str, frozenset[str]] | None = None

    def register(
        self,
        raw: str,
        kind: SlotKind | str = SlotKind.EXTRACTIVE,
        constraints: Iterable[ConstraintRule] = (),
        triggers: Iterable[str] = (),
        gazetteer: Iterable[str] = (),
    ) -> SlotLabelRecord:
        canonical = canonicalize_label(raw)
        kind = SlotKind(kind)
        with self._lock:
            existing = self._records.get(canonical)
            if existing is None:
                record = SlotLabelRecord(
                    canonical,
                    kind,
                    frozenset({raw, canonical}),
                    tuple(constraints),
                    tuple(triggers),
                    tuple(gazetteer),
                )
            else:
                if existing.kind is not kind:
                    raise RegistryConflictError(
                        f"label {canonical!r} is registered as {existing.kind.value}, "
                        f"cannot re-register as {kind.value}"
                    )
                record = replace(
                    existing,
                    aliases=existing.aliases | {raw},
                    constraints=_merged(existing.constraints, constraints),
                    triggers=_merged(existing.triggers, triggers),
                    gazetteer=_merged(existing.gazetteer, gazetteer),
                )
            # copy-on-write so iterating readers keep a consistent view
            records = dict(self._records)
            records[canonical] = record
            self._records = records
            self._gazetteer_cache = None
        return record

    def get(self, label: str) -> SlotLabelRecord | None:
        try:
            return self._records.get(canonicalize_label(label))
        except LabelError:
            return None

    def __contains__(self, label: object) -> bool:
        return isinstance(label, str) and self.get(label) is not None

    def __len__(self) -> int:
        return len(self._records)

    def __iter__(self) -> Iterator[SlotLabelRecord]:
        return iter(list(self._records.values()))

    def labels(self) -> list[str]:
        return list(self._records)

    def abstractive(self) -> list[SlotLabelRecord]:
        return [r for r in self._records.values() if r.kind is SlotKind.ABSTRACTIVE]

    def kind_gazetteers(self) -> dict[str, frozenset[str]]:
        """Canonical gazetteer entries per named-entity kind, pooled across labels."""
        cache = self._gazetteer_cache
        if cache is not None:
            return cache
        pooled: dict[str, set[str]] = {}
        for r in self._records.values():
            for rule in r.constraints:
                if isinstance(rule.predicate, EntityKindIs) and rule.predicate.kind in EXTENDED_KINDS:
                    pooled.setdefault(rule.predicate.kind, set()).update(
                        apply_itn(g).canonical for g in r.gazetteer
                    )
        cache = {k: frozenset(v) for k, v in pooled.items()}
        self._gazetteer_cache = cache
        return cache

    # -- persistence

    @classmethod
    def from_config(cls, records: Iterable[Mapping]) -> SlotRegistry:
        reg = cls()
        for rec in records:
            label = rec["label"]
            canonical = canonicalize_label(label)
            reg.register(
                label,
                rec.get("kind", "extractive"),
                parse_rules(rec.get("constraints", ()), canonical),
                rec.get("triggers", ()),
                rec.get("gazetteer", ()),
            )
            for alias in rec.get("aliases", ()):
                reg.register(alias, rec.get("kind", "extractive"))
        return reg

    @classmethod
    def load(cls, path: str | Path) -> SlotRegistry:
        with open(path, encoding="utf-8") as fh:
            return cls.from_config(json.load(fh))

    def to_config(self) -> list[dict]:
        return [r.to_config() for r in self._records.values()]

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_config(), indent=2, ensure_ascii=False) + "\n", encoding="utf-8")

