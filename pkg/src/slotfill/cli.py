"""Command line entry point: ``slotfill <subcommand> ...`` (or ``python -m slotfill``).

Subcommands: annotate, gen-instruct, extract, evaluate, ablate, serve.
Exit status is 0 on success, 1 on runtime/data errors and 2 on usage errors.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path
from typing import Any

from slotfill.annotation import annotate_corpus
from slotfill.backends import GenerationBackend, HttpGenerationBackend, NoisyMockBackend, OracleBackend, ReplayBackend
from slotfill.evaluation import AlignmentError, LexiconMatcher, evaluate
from slotfill.instructgen import DISTRACTOR_SCOPES, DatasetStats, GenConfig, generate_dataset
from slotfill.model import AnnotatedTranscript, load_annotated, load_transcripts, write_jsonl
from slotfill.pipeline import ABLATION_MODES, Pipeline, PipelineConfig, run_ablation
from slotfill.registry import SlotRegistry

CORPUS_FILE = "annotated.jsonl"
REGISTRY_FILE = "registry.json"


class CliError(RuntimeError):
    pass


def _load(loader, path: Path) -> list:
    if not path.exists():
        raise CliError(f"{path}: no such file")
    items, diagnostics = loader(path)
    for d in diagnostics:
        print(f"{path}: {d}", file=sys.stderr)
    if not items:
        raise CliError(f"{path}: no valid records")
    return items


def _corpus_paths(corpus: Path, registry: Path | None) -> tuple[Path, Path]:
    """A corpus directory implies <dir>/annotated.jsonl and, by default, <dir>/registry.json."""
    if corpus.is_dir():
        return corpus / CORPUS_FILE, registry or corpus / REGISTRY_FILE
    if registry is None:
        raise CliError("--registry is required when --corpus is a file")
    return corpus, registry


def _registry(path: Path) -> SlotRegistry:
    if not path.exists():
        raise CliError(f"{path}: no such file")
    try:
        return SlotRegistry.load(path)
    except (ValueError, KeyError, TypeError) as exc:
        raise CliError(f"{path}: {exc}") from None


def _backend(args: argparse.Namespace, registry: SlotRegistry, gold: list[AnnotatedTranscript] | None) -> GenerationBackend:
    kind = args.backend
    if kind == "http":
        if not args.url:
            raise CliError("--backend http needs --url")
        return HttpGenerationBackend(args.url, timeout=args.timeout)
    if kind == "replay":
        if not args.replay:
            raise CliError("--backend replay needs --replay")
        return ReplayBackend.load(args.replay)
    if gold is None:
        raise CliError(f"--backend {kind} needs gold annotations (--gold)")
    if kind == "oracle":
        return OracleBackend(gold)
    return NoisyMockBackend(gold, registry, args.noise_rate, args.seed)


def _write_json(obj: Any, out: Path | None) -> None:
    text = json.dumps(obj, indent=2, ensure_ascii=False)
    if out:
        out.write_text(text + "\n", encoding="utf-8")
    else:
        print(text)


# -- subcommands


def cmd_annotate(args: argparse.Namespace) -> int:
    transcripts = _load(load_transcripts, args.transcripts)
    registry = _registry(args.registry)
    result = annotate_corpus(transcripts, registry, _backend(args, registry, None), args.max_labels)
    write_jsonl(args.out, (a.to_record() for a in result.annotated))
    if args.registry_out:
        registry.save(args.registry_out)
    for line in result.warnings + result.failures:
        print(line, file=sys.stderr)
    print(
        f"annotated {len(result.annotated)}/{len(transcripts)} transcripts, "
        f"induced {len(result.induced)} labels: {', '.join(result.induced) or '-'}"
    )
    return 0 if result.annotated else 1


def cmd_gen_instruct(args: argparse.Namespace) -> int:
    corpus_path, registry_path = _corpus_paths(args.corpus, args.registry)
    corpus = _load(load_annotated, corpus_path)
    registry = _registry(registry_path)
    config = GenConfig(
        seed=args.seed,
        context_len_range=tuple(args.context_range),
        text_len_range=tuple(args.text_range),
        distractor_count_range=tuple(args.distractor_range),
        samples_per_turn=args.samples_per_turn,
        include_unannotated=args.include_unannotated,
        distractor_scope=args.distractor_scope,
    )
    stats = DatasetStats()
    n = write_jsonl(args.out, (s.to_record() for s in generate_dataset(corpus, config, registry, stats)))
    for msg in stats.messages:
        print(msg, file=sys.stderr)
    if args.stats:
        _write_json(stats.to_record(), None)
    else:
        print(f"wrote {n} samples to {args.out} ({stats.warnings} warnings, {stats.errors} errors)")
    return 0


def cmd_extract(args: argparse.Namespace) -> int:
    transcripts = _load(load_transcripts, args.transcripts)
    registry = _registry(args.registry)
    gold = _load(load_annotated, args.gold) if args.gold else None
    pipeline = Pipeline(
        registry,
        _backend(args, registry, gold),
        config=PipelineConfig(
            context_turns=args.context_turns, text_turns=args.text_turns, passthrough_on_empty=args.passthrough
        ),
    )
    records = []
    failures = 0
    for transcript in transcripts:
        session = pipeline.new_session(transcript.id, args.labels)
        for turn in transcript.turns:
            res = pipeline.process_turn(session, turn)
            failures += not res.ok
            records.append({"unit_id": f"{transcript.id}:{turn.index}", **res.to_record()})
    write_jsonl(args.out, records)
    print(f"processed {len(records)} turns, {failures} failed; results in {args.out}")
    return 0


def _load_units(path: Path) -> dict[str, dict]:
    if not path.exists():
        raise CliError(f"{path}: no such file")
    units: dict[str, dict] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
                unit, frame = str(rec["unit_id"]), rec["frame"]
            except (json.JSONDecodeError, KeyError, TypeError) as exc:
                raise CliError(f"{path}: line {lineno}: expected {{'unit_id', 'frame'}} ({exc})") from None
            if not isinstance(frame, dict):
                raise CliError(f"{path}: line {lineno}: 'frame' must be an object")
            if unit in units:
                raise CliError(f"{path}: line {lineno}: duplicate unit_id {unit!r}")
            units[unit] = frame
    return units


def cmd_evaluate(args: argparse.Namespace) -> int:
    pred, ref = _load_units(args.pred), _load_units(args.ref)
    try:
        report = evaluate(pred, ref, LexiconMatcher() if args.semantic else None)
    except AlignmentError as exc:
        raise CliError(str(exc)) from None
    print(report.summary())
    if args.json:
        _write_json(report.to_record(), args.json)
    return 0


def cmd_ablate(args: argparse.Namespace) -> int:
    corpus_path, registry_path = _corpus_paths(args.corpus, args.registry)
    corpus = _load(load_annotated, corpus_path)
    registry = _registry(registry_path)
    reports = run_ablation(corpus, registry, _backend(args, registry, corpus), args.modes)
    n_turns = sum(len(d.transcript.turns) for d in corpus)
    print(f"{len(corpus)} transcripts, {n_turns} turns, backend={args.backend}")
    for mode, report in reports.items():
        s = report.lenient
        print(f"{mode:<17} lenient P={s.precision:.4f} R={s.recall:.4f} F1={s.f1:.4f}  strict F1={report.strict.f1:.4f}")
    if args.json:
        _write_json({m: r.to_record() for m, r in reports.items()}, args.json)
    return 0


def cmd_serve(args: argparse.Namespace) -> int:
    import uvicorn

    from slotfill.service import ServiceConfig, app_from_config

    flags = {
        "host": args.host,
        "port": args.port,
        "registry_path": args.registry and str(args.registry),
        "backend": args.backend,
        "generation_url": args.url,
        "extractor_url": args.extractor_url,
        "corpus_path": args.gold and str(args.gold),
        "replay_path": args.replay and str(args.replay),
        "noise_rate": args.noise_rate,
        "seed": args.seed,
        "max_in_flight": args.max_in_flight,
    }
    config = ServiceConfig.resolve(args.config, flags=flags)
    uvicorn.run(app_from_config(config), host=config.host, port=config.port, log_level="info")
    return 0


# -- argument parsing


def _range(text: str) -> tuple[int, int]:
    try:
        lo, hi = (int(x) for x in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected MIN,MAX, got {text!r}") from None
    return lo, hi


def _backend_flags(p: argparse.ArgumentParser, choices: tuple[str, ...], default: str | None) -> None:
    p.add_argument("--backend", choices=choices, default=default, required=default is None)
    p.add_argument("--url", help="generation endpoint for --backend http")
    p.add_argument("--replay", type=Path, help="{prompt sha256: text} JSON for --backend replay")
    p.add_argument("--timeout", type=float, default=10.0)
    p.add_argument("--noise-rate", type=float, default=0.3, help="spurious-value rate for noisy-mock")
    p.add_argument("--seed", type=int, default=0)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="slotfill", description="Zero-shot slot filling toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("annotate", help="teacher-annotate transcripts and induce labels")
    p.add_argument("--transcripts", type=Path, required=True)
    p.add_argument("--registry", type=Path, required=True)
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--registry-out", type=Path, help="write the grown registry here")
    p.add_argument("--max-labels", type=int, help="cap on seed labels per prompt (default: all)")
    _backend_flags(p, ("replay", "http"), None)
    p.set_defaults(func=cmd_annotate)

    p = sub.add_parser("gen-instruct", help="build the instruction fine-tuning dataset")
    p.add_argument("--corpus", type=Path, required=True, help="annotated JSONL or a directory holding one")
    p.add_argument("--registry", type=Path)
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--context-range", type=_range, default=(0, 6), metavar="MIN,MAX")
    p.add_argument("--text-range", type=_range, default=(1, 3), metavar="MIN,MAX")
    p.add_argument("--distractor-range", type=_range, default=(1, 5), metavar="MIN,MAX")
    p.add_argument("--samples-per-turn", type=int, default=2)
    p.add_argument("--include-unannotated", action="store_true")
    p.add_argument("--distractor-scope", choices=DISTRACTOR_SCOPES, default="global")
    p.add_argument("--stats", action="store_true", help="print sample/warning counts and label histogram")
    p.set_defaults(func=cmd_gen_instruct)

    p = sub.add_parser("extract", help="run the pipeline over transcripts in batch")
    p.add_argument("--transcripts", type=Path, required=True)
    p.add_argument("--registry", type=Path, required=True)
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--gold", type=Path, help="annotated JSONL backing the oracle/noisy-mock backends")
    p.add_argument("--labels", nargs="+", help="requested labels (default: whole registry)")
    p.add_argument("--context-turns", type=int, default=4)
    p.add_argument("--text-turns", type=int, default=1)
    p.add_argument("--passthrough", action="store_true", help="query all labels when the prefilter finds none")
    _backend_flags(p, ("oracle", "noisy-mock", "replay", "http"), "oracle")
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("evaluate", help="strict and lenient P/R/F1 of predicted frames")
    p.add_argument("--pred", type=Path, required=True)
    p.add_argument("--ref", type=Path, required=True)
    p.add_argument("--semantic", action="store_true", help="enable the lexicon semantic matcher")
    p.add_argument("--json", type=Path, help="write the full report (with per-pair explanations) here")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("ablate", help="prefilter_only / constraints_only / full comparison")
    p.add_argument("--corpus", type=Path, required=True, help="annotated JSONL or a directory holding one")
    p.add_argument("--registry", type=Path)
    p.add_argument("--modes", nargs="+", choices=ABLATION_MODES, default=list(ABLATION_MODES))
    p.add_argument("--json", type=Path)
    _backend_flags(p, ("oracle", "noisy-mock", "replay", "http"), "noisy-mock")
    p.set_defaults(func=cmd_ablate)

    p = sub.add_parser("serve", help="run the HTTP service")
    p.add_argument("--config", type=Path, help="JSON service config (flags > SLOTFILL_* env > file)")
    p.add_argument("--host")
    p.add_argument("--port", type=int)
    p.add_argument("--registry", type=Path)
    p.add_argument("--backend", choices=("http", "oracle", "noisy-mock", "replay"))
    p.add_argument("--url")
    p.add_argument("--extractor-url")
    p.add_argument("--gold", type=Path)
    p.add_argument("--replay", type=Path)
    p.add_argument("--noise-rate", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--max-in-flight", type=int)
    p.set_defaults(func=cmd_serve)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (CliError, ValueError, OSError) as exc:
        print(f"slotfill {args.command}: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
