from __future__ import annotations

import asyncio
import json
import threading

import httpx
import pytest
from fastapi.testclient import TestClient

from slotfill.backends import OracleBackend
from slotfill.loadgen import run_load_in_process
from slotfill.pipeline import Pipeline
from slotfill.service import ConfigError, ServiceConfig, SessionTable, app_from_config, build_backend, create_app

EX1 = "Thank you for calling Net Company. How can I assist you today?"


@pytest.fixture
def client(corpus, registry):
    return TestClient(create_app(Pipeline(registry, OracleBackend(corpus))))


def test_example_1_extract(client):
    body = {"session_id": "s", "turn": {"speaker": "agent", "text": EX1}, "labels": ["Company Name"]}
    r = client.post("/v1/slots/extract", json=body)
    assert r.status_code == 200
    out = r.json()
    assert out["frame"] == {"Company Name": ["Net Company"]}
    assert out["narrowed_labels"] == ["Company Name"]
    assert out["status"] == "ok" and out["turn_index"] == 0
    assert {"backend", "overhead", "total"} <= set(out["timings_ms"])


@pytest.mark.parametrize(
    "body, field",
    [
        ({"session_id": "s", "turn": {"speaker": "agent", "text": ""}}, "text"),
        ({"session_id": "s", "turn": {"speaker": "agent", "text": "   "}}, "text"),
        ({"session_id": "s", "turn": {"speaker": "robot", "text": "hi"}}, "speaker"),
        ({"session_id": "", "turn": {"speaker": "agent", "text": "hi"}}, "session_id"),
        ({"session_id": "s", "turn": {"speaker": "agent", "text": "hi"}, "window": {"context": 1, "text": 0}}, "text"),
        ({"turn": {"speaker": "agent", "text": "hi"}}, "session_id"),
    ],
)
def test_validation_errors_name_the_field(client, body, field):
    r = client.post("/v1/slots/extract", json=body)
    assert r.status_code == 422
    assert any(err["loc"][-1] == field for err in r.json()["detail"])


def test_unknown_fields_ignored_and_turns_sequenced(client):
    for i in range(3):
        r = client.post("/v1/slots/extract", json={"session_id": "q", "turn": {"speaker": "agent", "text": EX1},
                                                   "extra": True})
        assert r.json()["turn_index"] == i


def test_window_override(client, worked_dialogue):
    for t in worked_dialogue.transcript.turns[:2]:
        r = client.post(
            "/v1/slots/extract",
            json={"session_id": "w", "turn": {"speaker": t.speaker.value, "text": t.text},
                  "window": {"context": 0, "text": 2}},
        )
    assert r.json()["frame"] == {**worked_dialogue.frame(0).to_dict(), **worked_dialogue.frame(1).to_dict()}


def test_backend_failure_status(registry):
    class Down:
        def generate(self, prompt, max_tokens=512, temperature=0.0):
            from slotfill.backends import BackendError

            raise BackendError("down")

    c = TestClient(create_app(Pipeline(registry, Down())))
    r = c.post("/v1/slots/extract", json={"session_id": "s", "turn": {"speaker": "agent", "text": EX1}})
    assert r.status_code == 502 and r.json()["status"] == "backend_error"


def test_health_and_registry(client, registry):
    assert client.get("/healthz").json()["status"] == "ok"
    labels = client.get("/v1/registry").json()["labels"]
    assert [x["label"] for x in labels] == registry.labels()


def test_backpressure_returns_overloaded(registry):
    gate = threading.Event()

    class Slow:
        def generate(self, prompt, max_tokens=512, temperature=0.0):
            gate.wait(5)
            return "{}"

    app = create_app(Pipeline(registry, Slow()), ServiceConfig(max_in_flight=2))

    async def main():
        async with httpx.AsyncClient(transport=httpx.ASGITransport(app=app), base_url="http://t") as c:
            body = lambda i: {"session_id": f"s{i}", "turn": {"speaker": "agent", "text": EX1}}  # noqa: E731
            pending = [asyncio.create_task(c.post("/v1/slots/extract", json=body(i))) for i in range(2)]
            await asyncio.sleep(0.2)
            rejected = await c.post("/v1/slots/extract", json=body(9))
            gate.set()
            done = await asyncio.gather(*pending)
            return rejected, done

    rejected, done = asyncio.run(main())
    assert rejected.status_code == 503 and rejected.json()["detail"] == "overloaded"
    assert [r.status_code for r in done] == [200, 200]


def test_session_ttl_eviction(corpus, registry):
    now = [0.0]
    table = SessionTable(Pipeline(registry, OracleBackend(corpus)), ttl_s=10, clock=lambda: now[0])
    table.get_or_create("a")
    now[0] = 5
    table.get_or_create("b")
    now[0] = 12
    table.get_or_create("b")
    assert len(table) == 1


def test_concurrent_sessions_keep_order(corpus, registry):
    app = create_app(Pipeline(registry, OracleBackend(corpus)))
    report = run_load_in_process(app, corpus, n_sessions=30, turns_per_session=4)
    assert report.requests == 120
    assert not report.errors and not report.ordering_violations and not report.frame_mismatches


def test_config_precedence(tmp_path):
    path = tmp_path / "svc.json"
    path.write_text(json.dumps({"port": 1000, "max_in_flight": 5, "backend": "oracle"}), encoding="utf-8")
    env = {"SLOTFILL_PORT": "2000", "SLOTFILL_NOISE_RATE": "0.5"}
    cfg = ServiceConfig.resolve(path, env=env, flags={"port": 3000, "seed": None})
    assert (cfg.port, cfg.max_in_flight, cfg.noise_rate, cfg.backend, cfg.seed) == (3000, 5, 0.5, "oracle", 0)
    assert ServiceConfig.resolve(path, env=env).port == 2000


@pytest.mark.parametrize(
    "kwargs",
    [{"max_in_flight": 0}, {"request_timeout_s": 0}, {"backend": "gpu"}],
)
def test_config_invariants(kwargs):
    with pytest.raises(ConfigError):
        ServiceConfig(**kwargs)


def test_config_file_rejects_unknown_keys_and_bad_env(tmp_path):
    path = tmp_path / "svc.json"
    path.write_text(json.dumps({"prot": 1}), encoding="utf-8")
    with pytest.raises(ConfigError):
        ServiceConfig.resolve(path, env={})
    with pytest.raises(ConfigError):
        ServiceConfig.resolve(None, env={"SLOTFILL_PORT": "eighty"})


def test_backend_requirements(registry, fixtures_dir):
    with pytest.raises(ConfigError):
        build_backend(ServiceConfig(backend="http"), registry)
    cfg = ServiceConfig(
        backend="noisy-mock",
        corpus_path=str(fixtures_dir / "annotated.jsonl"),
        registry_path=str(fixtures_dir / "registry.json"),
    )
    app = app_from_config(cfg)
    r = TestClient(app).post("/v1/slots/extract", json={"session_id": "s", "turn": {"speaker": "agent", "text": EX1}})
    assert r.status_code == 200
