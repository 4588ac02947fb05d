"""Command-line entry point.

Commands: validate, generate, ask, score, report. Exit codes: 0 on
success, 1 for validation or scoring failures, 2 for I/O and config
errors. All stages exchange data through files only.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .allen import RelationTag
from .errors import ChronoqaError, GatewayError, LoadError, ManifestError, ScoreError
from .evaluate import report_csv, report_text, ScoreRecord, aggregate
from .gateway import Gateway
from .manifest import RunManifest, load_manifest
from .pipeline import ask_items, generate_items, score_responses, validate_manifest
from .qagen import item_from_record, item_to_record, read_jsonl, write_jsonl
from .evaluate import write_scores

log = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FAILURE = 1  # validation or scoring failure
EXIT_CONFIG = 2  # I/O or config error


def _manifest(args) -> RunManifest:
    if not args.manifest:
        raise ManifestError("--manifest is required")
    return load_manifest(args.manifest, seed_override=args.seed)


def cmd_validate(args) -> int:
    manifest = _manifest(args)
    try:
        report, _ = validate_manifest(manifest)
    except LoadError as exc:
        print(f"FAIL  {exc}")
        return EXIT_FAILURE
    verified = 0
    for entry in report.entries:
        status = "ok" if entry.ok else "FAIL"
        print(f"{status:4}  {entry.subject}: {entry.detail}")
        if entry.ok and ("-T>" in entry.subject or "->" in entry.subject):
            verified += 1
    print(f"{verified} dependency check(s) passed" if report.ok else "validation failed")
    return EXIT_OK if report.ok else EXIT_FAILURE


def _parse_relation_filter(text: str | None) -> list[RelationTag] | None:
    if not text:
        return None
    return [RelationTag.parse(token) for token in text.split(",") if token.strip()]


def cmd_generate(args) -> int:
    manifest = _manifest(args)
    gateway = None
    if args.mode == "llm":
        provider = manifest.provider(args.provider or "default")
        gateway = Gateway(provider, cache_dir=args.cache_dir)
    outcome = generate_items(
        manifest,
        relation_filter=_parse_relation_filter(args.relations),
        mode=args.mode,
        paraphrases=args.paraphrases,
        gateway=gateway,
    )
    write_jsonl([item_to_record(i) for i in outcome.items], args.out)
    print(f"wrote {len(outcome.items)} items to {args.out}")
    for (tag, cardinality), count in sorted(outcome.counts().items()):
        print(f"  {tag:16} {cardinality:9} {count}")
    for skip in outcome.skips:
        print(f"  skipped {skip.relation_name}[{skip.tuple_index}] {skip.tag}: {skip.reason}")
    return EXIT_OK


def cmd_ask(args) -> int:
    manifest = _manifest(args)
    provider = manifest.provider(args.provider or "default")
    gateway = Gateway(provider, cache_dir=args.cache_dir)
    items = [item_from_record(r) for r in read_jsonl(args.qa)]
    records = ask_items(items, gateway, args.prompt, args.mode)
    write_jsonl(records, args.out)
    failures = sum(1 for r in records if "error" in r)
    print(f"wrote {len(records)} responses to {args.out} ({failures} failures)")
    return EXIT_OK


def _report_paths(out: str) -> tuple[Path, Path]:
    base = Path(out)
    return base.with_suffix(".report.csv"), base.with_suffix(".report.txt")


def cmd_score(args) -> int:
    manifest = _manifest(args)
    items = {r["id"]: item_from_record(r) for r in read_jsonl(args.qa)}
    responses = read_jsonl(args.responses)
    gateway = None
    if args.mode == "judge":
        provider = manifest.provider(args.provider or "default")
        gateway = Gateway(provider, cache_dir=args.cache_dir)
    records, report = score_responses(items, responses, args.mode, manifest, gateway)
    write_scores(records, args.out)
    csv_path, txt_path = _report_paths(args.out)
    csv_path.write_text(report_csv(report), encoding="utf-8")
    txt_path.write_text(report_text(report), encoding="utf-8")
    print(f"wrote {len(records)} score records to {args.out}")
    print(f"wrote reports to {csv_path} and {txt_path}")
    overall = next(s for s in report.slices if s.slice_type == "overall")
    t_text = "-" if overall.time_mean is None else f"{overall.time_mean:.1f}"
    print(
        f"overall: A={overall.answer_mean:.1f} T={t_text} "
        f"AT={overall.at_mean:.1f} delta={overall.delta:.1f}"
    )
    return EXIT_OK


def cmd_report(args) -> int:
    items = {r["id"]: item_from_record(r) for r in read_jsonl(args.qa)}
    records = [ScoreRecord.from_record(r) for r in read_jsonl(args.scores)]
    if not records:
        raise ScoreError("scores file is empty")
    slices = [s.strip() for s in args.slices.split(",")] if args.slices else None
    report = aggregate(records, items, slice_types=slices)
    csv_path, txt_path = _report_paths(args.out)
    csv_path.write_text(report_csv(report), encoding="utf-8")
    txt_path.write_text(report_text(report), encoding="utf-8")
    print(f"wrote reports to {csv_path} and {txt_path}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="chronoqa",
        description="Generate time-sensitive QA benchmarks from temporal tables and score model responses.",
    )
    parser.add_argument("--manifest", help="run manifest (JSON)")
    parser.add_argument("--seed", type=int, default=None, help="override the manifest seed")
    parser.add_argument("--cache-dir", default=None, help="response cache directory")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="load relations and verify declared dependencies")
    p.set_defaults(handler=cmd_validate)

    p = sub.add_parser("generate", help="emit benchmark items as JSONL")
    p.add_argument("--relations", help="comma-separated relation subset (e.g. overlap-current)")
    p.add_argument("--paraphrases", type=int, default=None)
    p.add_argument("--mode", choices=("template", "llm"), default=None)
    p.add_argument("--provider", help="provider name for llm question mode")
    p.add_argument("--out", required=True)
    p.set_defaults(handler=cmd_generate)

    p = sub.add_parser("ask", help="query a model for every item")
    p.add_argument("--qa", required=True, help="items JSONL from generate")
    p.add_argument("--provider", required=True)
    p.add_argument("--prompt", default="reasoning", help="alignment | reasoning | cot | time_cot")
    p.add_argument("--mode", choices=("open", "closed"), default="closed")
    p.add_argument("--out", required=True)
    p.set_defaults(handler=cmd_ask)

    p = sub.add_parser("score", help="score responses and aggregate reports")
    p.add_argument("--qa", required=True)
    p.add_argument("--responses", required=True)
    p.add_argument("--mode", choices=("deterministic", "judge"), default="deterministic")
    p.add_argument("--provider", help="provider name for judge mode")
    p.add_argument("--out", required=True)
    p.set_defaults(handler=cmd_score)

    p = sub.add_parser("report", help="re-aggregate existing scores with chosen slices")
    p.add_argument("--qa", required=True)
    p.add_argument("--scores", required=True)
    p.add_argument("--slices", help="comma-separated slice types (relation,cardinality,domain,span,hops)")
    p.add_argument("--out", required=True)
    p.set_defaults(handler=cmd_report)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.handler(args)
    except (ManifestError, FileNotFoundError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (LoadError, ScoreError, GatewayError, ChronoqaError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
