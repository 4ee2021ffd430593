"""Ablation over the fixture corpus across noisy-mock seeds and noise rates.

    python scripts/run_ablation.py [--seeds 0 1 2 3 4] [--rates 0.1 0.3 0.5] [--out results.json]

Prints lenient F1 for prefilter_only / constraints_only / full and whether
the ordering full >= constraints_only >= prefilter_only holds in every run.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from slotfill.backends import NoisyMockBackend
from slotfill.model import load_annotated
from slotfill.pipeline import ABLATION_MODES, run_ablation
from slotfill.registry import SlotRegistry

FIXTURES = Path(__file__).resolve().parent.parent / "fixtures"


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--fixtures", type=Path, default=FIXTURES)
    parser.add_argument("--seeds", type=int, nargs="+", default=[0, 1, 2, 3, 4])
    parser.add_argument("--rates", type=float, nargs="+", default=[0.1, 0.3, 0.5])
    parser.add_argument("--out", type=Path)
    args = parser.parse_args(argv)

    corpus, _ = load_annotated(args.fixtures / "annotated.jsonl")
    registry = SlotRegistry.load(args.fixtures / "registry.json")
    rows = []
    print(f"{'rate':>5} {'seed':>5} " + " ".join(f"{m:>17}" for m in ABLATION_MODES) + "  ordered")
    for rate in args.rates:
        for seed in args.seeds:
            backend = NoisyMockBackend(corpus, registry, rate, seed)
            reports = run_ablation(corpus, registry, backend)
            f1 = {m: reports[m].lenient.f1 for m in ABLATION_MODES}
            ordered = f1["full"] >= f1["constraints_only"] >= f1["prefilter_only"] and f1["full"] > f1["prefilter_only"]
            rows.append({"rate": rate, "seed": seed, "lenient_f1": f1, "ordered": ordered})
            print(f"{rate:>5.2f} {seed:>5d} " + " ".join(f"{f1[m]:>17.4f}" for m in ABLATION_MODES) + f"  {ordered}")
    if args.out:
        args.out.write_text(json.dumps(rows, indent=2) + "\n", encoding="utf-8")
    return 0 if all(r["ordered"] for r in rows) else 1


if __name__ == "__main__":
    sys.exit(main())
