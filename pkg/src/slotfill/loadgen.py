"""In-process load harness for the HTTP service.

Sessions replay annotated transcripts turn by turn. Every session sends its
turns sequentially (the per-session caller contract) while all sessions run
concurrently, so each round puts ``n_sessions`` requests in flight at once.
"""

from __future__ import annotations

import asyncio
import time
from collections.abc import Sequence
from dataclasses import dataclass, field

import httpx
import numpy as np

from slotfill.model import AnnotatedTranscript


@dataclass
class LoadReport:
    requests: int = 0
    errors: list[str] = field(default_factory=list)
    ordering_violations: list[str] = field(default_factory=list)
    frame_mismatches: list[str] = field(default_factory=list)
    overhead_ms: list[float] = field(default_factory=list)
    backend_ms: list[float] = field(default_factory=list)
    wall_s: float = 0.0

    def percentile(self, values: Sequence[float], q: float) -> float:
        return float(np.percentile(values, q)) if values else 0.0

    @property
    def overhead_p99_ms(self) -> float:
        return self.percentile(self.overhead_ms, 99)

    def summary(self) -> str:
        return (
            f"requests={self.requests} errors={len(self.errors)} "
            f"ordering_violations={len(self.ordering_violations)} frame_mismatches={len(self.frame_mismatches)} "
            f"overhead p50={self.percentile(self.overhead_ms, 50):.2f}ms p99={self.overhead_p99_ms:.2f}ms "
            f"backend p50={self.percentile(self.backend_ms, 50):.2f}ms wall={self.wall_s:.2f}s"
        )


async def _drive_session(
    client: httpx.AsyncClient, session_id: str, doc: AnnotatedTranscript, turns: int, report: LoadReport
) -> None:
    for turn in doc.transcript.turns[:turns]:
        body = {"session_id": session_id, "turn": {"speaker": turn.speaker.value, "text": turn.text}}
        try:
            resp = await client.post("/v1/slots/extract", json=body)
        except httpx.HTTPError as exc:
            report.errors.append(f"{session_id}:{turn.index}: {exc!r}")
            return
        report.requests += 1
        if resp.status_code != 200:
            report.errors.append(f"{session_id}:{turn.index}: HTTP {resp.status_code} {resp.text[:120]}")
            continue
        out = resp.json()
        if out["turn_index"] != turn.index:
            report.ordering_violations.append(f"{session_id}: sent turn {turn.index}, served as {out['turn_index']}")
        gold = doc.frame(turn.index).to_dict()
        if out["frame"] != gold:
            report.frame_mismatches.append(f"{session_id}:{turn.index}: {out['frame']} != {gold}")
        report.overhead_ms.append(out["timings_ms"]["overhead"])
        report.backend_ms.append(out["timings_ms"]["backend"])


async def run_load(
    client: httpx.AsyncClient, corpus: Sequence[AnnotatedTranscript], n_sessions: int = 100, turns_per_session: int = 3
) -> LoadReport:
    report = LoadReport()
    t0 = time.perf_counter()
    await asyncio.gather(
        *(
            _drive_session(client, f"load-{i}", corpus[i % len(corpus)], turns_per_session, report)
            for i in range(n_sessions)
        )
    )
    report.wall_s = time.perf_counter() - t0
    return report


def run_load_in_process(app, corpus: Sequence[AnnotatedTranscript], n_sessions: int = 100, turns_per_session: int = 3) -> LoadReport:
    async def main() -> LoadReport:
        transport = httpx.ASGITransport(app=app)
        async with httpx.AsyncClient(transport=transport, base_url="http://slotfill", timeout=60.0) as client:
            return await run_load(client, corpus, n_sessions, turns_per_session)

    return asyncio.run(main())
