from __future__ import annotations

import json

import httpx
import pytest

from slotfill.backends import (
    BackendError,
    GenerationBackend,
    HttpGenerationBackend,
    NoisyMockBackend,
    OracleBackend,
    ReplayBackend,
    prompt_hash,
    read_query_prompt,
)
from slotfill.constraints import check
from slotfill.pipeline import Session, build_query_prompt


def _prompt(doc, index, labels):
    session = Session(doc.id, labels, context_turns=2, text_turns=1)
    session.history.extend(doc.transcript.turns[: index + 1])
    return build_query_prompt(session, labels)


def test_protocol_conformance(corpus, registry):
    for backend in (OracleBackend(corpus), NoisyMockBackend(corpus, registry), ReplayBackend({})):
        assert isinstance(backend, GenerationBackend)


def test_read_query_prompt(worked_dialogue):
    labels = ["Customer Name", "Account Number"]
    got_labels, text = read_query_prompt(_prompt(worked_dialogue, 1, labels))
    assert got_labels == labels
    assert text == f"Customer: {worked_dialogue.transcript.turns[1].text}"


def test_read_query_prompt_rejects_foreign_text():
    with pytest.raises(BackendError):
        read_query_prompt("hello")


def test_oracle_answers_gold_restricted(worked_dialogue, corpus):
    oracle = OracleBackend(corpus)
    out = json.loads(oracle.generate(_prompt(worked_dialogue, 1, ["Customer Name", "Claim Number"])))
    assert out == {"Customer Name": ["John Doe"]}
    assert oracle.calls == 1


def test_replay(tmp_path):
    path = tmp_path / "r.json"
    path.write_text(json.dumps({prompt_hash("p"): "out"}), encoding="utf-8")
    backend = ReplayBackend.load(path)
    assert backend.generate("p") == "out"
    with pytest.raises(BackendError):
        backend.generate("q")
    assert ReplayBackend.from_prompts([("p", "x")]).generate("p") == "x"


def test_noisy_mock_injects_only_violating_values(corpus, registry):
    labels = registry.labels()
    noisy = NoisyMockBackend(corpus, registry, rate=0.3, seed=1)
    oracle = OracleBackend(corpus)
    gaz = registry.kind_gazetteers()
    injected = opportunities = 0
    for doc in corpus:
        for t in doc.transcript.turns:
            prompt = _prompt(doc, t.index, labels)
            gold = json.loads(oracle.generate(prompt))
            got = json.loads(noisy.generate(prompt))
            assert got == json.loads(noisy.generate(prompt))  # deterministic per prompt
            for label, values in got.items():
                extra = values[len(gold.get(label, [])) :]
                rules = registry.get(label).constraints
                for v in extra:
                    injected += 1
                    assert not all(check(v, r, gaz).passed for r in rules)
            opportunities += sum(1 for lbl in labels if registry.get(lbl).constraints)
    rate = injected / opportunities
    assert 0.2 < rate < 0.4


def test_http_backend_contract_and_retry():
    calls = []

    def handler(request: httpx.Request) -> httpx.Response:
        calls.append(json.loads(request.content))
        if len(calls) == 1:
            raise httpx.ConnectError("boom")
        return httpx.Response(200, json={"text": '{"A": "b"}'})

    backend = HttpGenerationBackend("http://gen", client=httpx.Client(transport=httpx.MockTransport(handler)))
    assert backend.generate("hi", 64, 0.0) == '{"A": "b"}'
    assert calls[-1] == {"prompt": "hi", "max_tokens": 64, "temperature": 0.0}
    assert len(calls) == 2


@pytest.mark.parametrize(
    "response",
    [httpx.Response(500, text="down"), httpx.Response(200, json={"nope": 1}), httpx.Response(200, text="<html>")],
)
def test_http_backend_errors(response):
    backend = HttpGenerationBackend(
        "http://gen", client=httpx.Client(transport=httpx.MockTransport(lambda r: response))
    )
    with pytest.raises(BackendError):
        backend.generate("hi")


def test_http_backend_gives_up_after_retries():
    def handler(request):
        raise httpx.ConnectError("down")

    backend = HttpGenerationBackend("http://gen", client=httpx.Client(transport=httpx.MockTransport(handler)))
    with pytest.raises(BackendError, match="unreachable"):
        backend.generate("hi")
