from __future__ import annotations

import json

import pytest
from hypothesis import given, settings, strategies as st

from slotfill.instructgen import (
    DatasetStats,
    GenConfig,
    GenConfigError,
    build_sample,
    generate_dataset,
)
from slotfill.model import AnnotatedTranscript, SlotFrame, Speaker, Transcript, Turn
from slotfill.registry import SlotRegistry


def _check_contract(sample, doc):
    targets = set(sample.target_labels)
    assert not targets & set(sample.distractor_labels)
    assert set(sample.completion) == targets
    text_idx = [t.index for t in sample.text_turns]
    ctx_idx = [t.index for t in sample.context_turns]
    assert text_idx == list(range(text_idx[0], sample.anchor + 1))
    assert ctx_idx == list(range(text_idx[0] - len(ctx_idx), text_idx[0]))
    union = SlotFrame()
    for i in text_idx:
        union = union.union(doc.frame(i))
    assert set(union) == targets
    assert sorted(sample.prompt_labels) == sorted(sample.target_labels + sample.distractor_labels)


def test_config_validation():
    with pytest.raises(GenConfigError):
        GenConfig(text_len_range=(0, 2))
    with pytest.raises(GenConfigError):
        GenConfig(context_len_range=(3, 1))
    with pytest.raises(GenConfigError):
        GenConfig(samples_per_turn=0)
    with pytest.raises(GenConfigError):
        GenConfig(distractor_scope="galaxy")


def test_anchor_at_start_clamps(worked_dialogue, registry):
    s = build_sample(worked_dialogue, 0, GenConfig(context_len_range=(0, 0), text_len_range=(1, 3)), 0, registry)
    assert s.context_turns == ()
    assert [t.index for t in s.text_turns] == [0]


def test_worked_dialogue_targets(worked_dialogue, registry):
    cfg = GenConfig(context_len_range=(0, 2), text_len_range=(1, 1), distractor_count_range=(1, 1))
    s = build_sample(worked_dialogue, 1, cfg, 0, registry)
    assert set(s.target_labels) == {"Customer Name", "Account Number", "Reason For Call"}
    assert s.completion == worked_dialogue.frame(1)
    assert len(s.distractor_labels) == 1
    assert json.loads(s.response) == {
        "Customer Name": ["John Doe"],
        "Account Number": ["123456"],
        "Reason For Call": ["wifi doesn't work"],
    }


def test_same_draw_is_byte_identical(worked_dialogue, registry):
    cfg = GenConfig(seed=11)
    assert build_sample(worked_dialogue, 4, cfg, 1, registry).rendered == build_sample(worked_dialogue, 4, cfg, 1, registry).rendered


def test_rendered_framing(worked_dialogue, registry):
    s = build_sample(worked_dialogue, 1, GenConfig(), 0, registry)
    assert s.rendered.startswith("<s>[INST]<<SYS>>")
    assert "```\nMain text: " in s.rendered
    assert s.rendered.endswith("[/INST] " + s.response)
    assert s.to_record() == {"instruction": s.instruction, "response": s.response}


def test_too_few_distractors_warns():
    reg = SlotRegistry.from_config([{"label": "A"}, {"label": "B"}])
    t = Transcript("t", "d", (Turn(0, Speaker.AGENT, "hello"),))
    doc = AnnotatedTranscript(t, {0: {"A": "x"}})
    s = build_sample(doc, 0, GenConfig(distractor_count_range=(3, 3)), 0, reg)
    assert s.distractor_labels == ("B",)
    assert s.warnings


def test_counts_per_annotated_turn(worked_dialogue, registry):
    n_annotated = len(worked_dialogue.frames)
    assert len(list(generate_dataset([worked_dialogue], GenConfig(samples_per_turn=1), registry))) == n_annotated
    assert len(list(generate_dataset([worked_dialogue], GenConfig(samples_per_turn=3), registry))) == 3 * n_annotated


def test_include_unannotated_emits_empty_completions(worked_dialogue, registry):
    samples = list(generate_dataset([worked_dialogue], GenConfig(samples_per_turn=1, include_unannotated=True,
                                                          text_len_range=(1, 1)), registry))
    assert len(samples) == len(worked_dialogue.transcript.turns)
    empties = [s for s in samples if not s.target_labels]
    assert empties and all(s.response == "{}" for s in empties)


def test_draws_vary_per_anchor(corpus, registry):
    samples = list(generate_dataset(corpus, GenConfig(samples_per_turn=3, seed=5), registry))
    by_anchor = {}
    for s in samples:
        by_anchor.setdefault((s.transcript_id, s.anchor), []).append(
            (len(s.context_turns), len(s.text_turns), frozenset(s.distractor_labels))
        )
    differing = sum(len(set(v)) > 1 for v in by_anchor.values())
    assert differing / len(by_anchor) > 0.9


def test_domain_scope_draws_from_domain_labels(corpus, registry):
    cfg = GenConfig(distractor_scope="domain", samples_per_turn=2)
    domain_labels = {}
    for d in corpus:
        for f in d.frames.values():
            domain_labels.setdefault(d.transcript.domain, set()).update(f)
    stats = DatasetStats()
    for s in generate_dataset(corpus, cfg, registry, stats):
        assert set(s.distractor_labels) <= domain_labels[s.domain]
    assert stats.samples > 0


def test_stats_and_error_isolation(corpus, registry):
    broken = AnnotatedTranscript(corpus[0].transcript, {0: {"A": "x"}})
    object.__setattr__(broken, "frames", {0: SlotFrame({"A": "x"}), 99: SlotFrame({"A": "y"})})
    stats = DatasetStats()
    samples = list(generate_dataset([broken, corpus[1]], GenConfig(samples_per_turn=1), registry, stats))
    assert stats.errors == 1
    assert len(samples) == 1 + len(corpus[1].frames)
    assert stats.to_record()["samples"] == len(samples)
    assert sum(stats.label_histogram.values()) == sum(len(s.target_labels) for s in samples)


def test_empty_corpus_rejected(registry):
    with pytest.raises(ValueError):
        list(generate_dataset([], GenConfig(), registry))


@settings(max_examples=30)
@given(
    seed=st.integers(0, 2**31),
    ctx=st.tuples(st.integers(0, 4), st.integers(0, 4)).map(sorted),
    txt=st.tuples(st.integers(1, 4), st.integers(1, 4)).map(sorted),
    dis=st.tuples(st.integers(0, 6), st.integers(0, 6)).map(sorted),
    unannotated=st.booleans(),
)
def test_contract_holds_for_any_config(corpus, shared_registry, seed, ctx, txt, dis, unannotated):
    cfg = GenConfig(seed, tuple(ctx), tuple(txt), tuple(dis), 1, unannotated)
    docs = {d.id: d for d in corpus}
    for s in generate_dataset(corpus[:4], cfg, shared_registry):
        _check_contract(s, docs[s.transcript_id])
        assert txt[0] <= len(s.text_turns) <= txt[1] or s.text_turns[0].index == 0
