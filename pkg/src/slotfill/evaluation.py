"""Strict and lenient precision/recall/F1 over (label, value) pairs.

Lenient matching compares values after inverse text normalization and gives
binary credit for exact-normalized, token-subset and (optionally) semantic
matches. Pairs are matched one-to-one via maximum bipartite matching.
"""

from __future__ import annotations

from collections.abc import Mapping, Sequence
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Protocol

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import maximum_bipartite_matching

from slotfill.itn import apply_itn
from slotfill.labels import canonicalize_label
from slotfill.model import SlotFrame, is_na

STOPWORDS = frozenset(
    """a an and the of to in on at for from by with my your our their his her its is are was were
    be it this that i you we they me us them or""".split()
)


class AlignmentError(ValueError):
    pass


class MatchRule(str, Enum):
    EXACT_NORMALIZED = "ExactNormalized"
    TOKEN_SUBSET = "TokenSubset"
    TIME_EQUIVALENCE = "TimeEquivalence"
    NUMBER_EQUIVALENCE = "NumberEquivalence"
    SEMANTIC = "Semantic"
    NO_MATCH = "NoMatch"


class SemanticMatcher(Protocol):
    def __call__(self, pred: str, ref: str) -> bool: ...


@dataclass
class LexiconMatcher:
    """Rewrites pred tokens through a small lexicon ("couple" -> "2"), then
    retries the normalized/subset comparison."""

    lexicon: Mapping[str, str] = field(
        default_factory=lambda: {"couple": "2", "pair": "2", "both": "2", "dozen": "12", "single": "1", "few": "3"}
    )

    def __call__(self, pred: str, ref: str) -> bool:
        words = apply_itn(pred).canonical.split()
        rewritten = " ".join(self.lexicon.get(w, w) for w in words)
        if rewritten == " ".join(words):
            return False
        return _lenient_core(rewritten, ref) is not MatchRule.NO_MATCH


def _content_tokens(tokens: set[str]) -> set[str]:
    return {t for t in tokens if t not in STOPWORDS}


def _is_numeric(tok: str) -> bool:
    return tok.replace(".", "", 1).isdigit() and tok.isascii()


def _lenient_core(pred: str, ref: str) -> MatchRule:
    p, r = apply_itn(pred), apply_itn(ref)
    if p.canonical == r.canonical:
        if not p.canonical:
            return MatchRule.NO_MATCH
        if pred.casefold().strip() == ref.casefold().strip():
            return MatchRule.EXACT_NORMALIZED
        if "time" in p.kinds and "time" in r.kinds:
            return MatchRule.TIME_EQUIVALENCE
        if p.kinds & r.kinds & {"number", "money"}:
            return MatchRule.NUMBER_EQUIVALENCE
        return MatchRule.EXACT_NORMALIZED
    pt, rt = set(p.canonical.split()), set(r.canonical.split())
    small, large = (pt, rt) if len(pt) <= len(rt) else (rt, pt)
    if _content_tokens(small) and small <= large:
        if all(_is_numeric(t) for t in small):
            return MatchRule.NUMBER_EQUIVALENCE
        return MatchRule.TOKEN_SUBSET
    return MatchRule.NO_MATCH


def values_match_lenient(pred: str, ref: str, semantic: SemanticMatcher | None = None) -> MatchRule:
    """Which lenient rule (if any) makes ``pred`` match ``ref``."""
    rule = _lenient_core(pred, ref)
    if rule is MatchRule.NO_MATCH and semantic is not None and semantic(pred, ref):
        return MatchRule.SEMANTIC
    return rule


@dataclass(frozen=True)
class MatchExplanation:
    unit_id: str
    pred: tuple[str, str]
    ref: tuple[str, str] | None
    rule: MatchRule

    @property
    def matched(self) -> bool:
        return self.rule is not MatchRule.NO_MATCH

    def to_record(self) -> dict:
        return {
            "unit_id": self.unit_id,
            "pred": list(self.pred),
            "ref": list(self.ref) if self.ref else None,
            "matched": self.matched,
            "rule": self.rule.value,
        }


@dataclass(frozen=True)
class Scores:
    precision: float
    recall: float
    f1: float

    @classmethod
    def from_counts(cls, matched: int, n_pred: int, n_ref: int) -> Scores:
        p = matched / n_pred if n_pred else 0.0
        r = matched / n_ref if n_ref else 0.0
        f1 = 0.0 if p + r == 0 else 2 * p * r / (p + r)
        return cls(p, r, f1)

    def to_record(self) -> dict:
        return {"precision": self.precision, "recall": self.recall, "f1": self.f1}


@dataclass(frozen=True)
class EvalReport:
    strict: Scores
    lenient: Scores
    per_pair: tuple[MatchExplanation, ...]
    pred_pairs: int
    ref_pairs: int
    lenient_matches: int
    strict_matches: int

    @property
    def counts(self) -> dict[str, int]:
        return {
            "pred_pairs": self.pred_pairs,
            "ref_pairs": self.ref_pairs,
            "lenient_matches": self.lenient_matches,
            "strict_matches": self.strict_matches,
        }

    def to_record(self) -> dict:
        return {
            "strict": self.strict.to_record(),
            "lenient": self.lenient.to_record(),
            "counts": self.counts,
            "per_pair": [e.to_record() for e in self.per_pair],
        }

    def summary(self) -> str:
        c = self.counts
        lines = [
            f"pairs: pred={c['pred_pairs']} ref={c['ref_pairs']}",
            f"strict : {c['strict_matches']}/{c['ref_pairs']} matched  "
            f"P={self.strict.precision:.4f} R={self.strict.recall:.4f} F1={self.strict.f1:.4f}",
            f"lenient: {c['lenient_matches']}/{c['ref_pairs']} matched  "
            f"P={self.lenient.precision:.4f} R={self.lenient.recall:.4f} F1={self.lenient.f1:.4f}",
        ]
        return "\n".join(lines)


def _max_matching(n_pred: int, n_ref: int, edge: Callable[[int, int], bool]) -> list[int]:
    """match[i] = index of the ref paired with pred i, or -1."""
    if n_pred == 0 or n_ref == 0:
        return [-1] * n_pred
    adj = np.zeros((n_pred, n_ref), dtype=np.int8)
    for i in range(n_pred):
        for j in range(n_ref):
            if edge(i, j):
                adj[i, j] = 1
    if not adj.any():
        return [-1] * n_pred
    return [int(x) for x in maximum_bipartite_matching(csr_matrix(adj), perm_type="column")]


def _raw_pairs(frame: SlotFrame | Mapping) -> list[tuple[str, str]]:
    if isinstance(frame, SlotFrame):
        return frame.pairs()
    out = []
    for label, values in frame.items():
        if isinstance(values, str):
            values = [values]
        out.extend((label, str(v)) for v in values if not is_na(v))
    return out


def evaluate_unit(
    unit_id: str,
    pred: SlotFrame | Mapping,
    ref: SlotFrame | Mapping,
    semantic: SemanticMatcher | None = None,
) -> tuple[list[MatchExplanation], int, int, int, int]:
    """Returns (explanations, n_pred, n_ref, lenient_matches, strict_matches)."""
    pred_pairs, ref_pairs = _raw_pairs(pred), _raw_pairs(ref)
    pred_labels = [canonicalize_label(lbl) for lbl, _ in pred_pairs]
    ref_labels = [canonicalize_label(lbl) for lbl, _ in ref_pairs]
    rules: dict[tuple[int, int], MatchRule] = {}

    def lenient_edge(i: int, j: int) -> bool:
        if pred_labels[i] != ref_labels[j]:
            return False
        rule = values_match_lenient(pred_pairs[i][1], ref_pairs[j][1], semantic)
        rules[i, j] = rule
        return rule is not MatchRule.NO_MATCH

    def strict_edge(i: int, j: int) -> bool:
        return pred_pairs[i] == ref_pairs[j]

    lenient = _max_matching(len(pred_pairs), len(ref_pairs), lenient_edge)
    strict = _max_matching(len(pred_pairs), len(ref_pairs), strict_edge)
    explanations = []
    for i, j in enumerate(lenient):
        pair = (pred_labels[i], pred_pairs[i][1])
        if j < 0:
            explanations.append(MatchExplanation(unit_id, pair, None, MatchRule.NO_MATCH))
        else:
            explanations.append(MatchExplanation(unit_id, pair, (ref_labels[j], ref_pairs[j][1]), rules[i, j]))
    n_len = sum(1 for j in lenient if j >= 0)
    n_strict = sum(1 for j in strict if j >= 0)
    return explanations, len(pred_pairs), len(ref_pairs), n_len, n_strict


def evaluate(
    pred: Mapping[str, SlotFrame | Mapping] | Sequence[SlotFrame | Mapping],
    ref: Mapping[str, SlotFrame | Mapping] | Sequence[SlotFrame | Mapping],
    semantic: SemanticMatcher | None = None,
) -> EvalReport:
    """Score predictions against references, unit by unit.

    ``pred`` and ``ref`` are either mappings keyed by unit id (same key sets
    required) or equal-length sequences aligned by position.
    """
    if isinstance(pred, Mapping) != isinstance(ref, Mapping):
        raise AlignmentError("pred and ref must both be keyed mappings or both be sequences")
    if isinstance(pred, Mapping):
        if set(pred) != set(ref):
            missing = sorted(set(ref) - set(pred))[:5]
            extra = sorted(set(pred) - set(ref))[:5]
            raise AlignmentError(f"unit ids differ: missing from pred {missing}, unknown in pred {extra}")
        units = [(str(k), pred[k], ref[k]) for k in ref]
    else:
        if len(pred) != len(ref):
            raise AlignmentError(f"{len(pred)} pred units vs {len(ref)} ref units")
        units = [(str(i), p, r) for i, (p, r) in enumerate(zip(pred, ref))]
    explanations: list[MatchExplanation] = []
    n_pred = n_ref = n_len = n_strict = 0
    for unit_id, p, r in units:
        ex, a, b, c, d = evaluate_unit(unit_id, p, r, semantic)
        explanations.extend(ex)
        n_pred += a
        n_ref += b
        n_len += c
        n_strict += d
    return EvalReport(
        strict=Scores.from_counts(n_strict, n_pred, n_ref),
        lenient=Scores.from_counts(n_len, n_pred, n_ref),
        per_pair=tuple(explanations),
        pred_pairs=n_pred,
        ref_pairs=n_ref,
        lenient_matches=n_len,
        strict_matches=n_strict,
    )
