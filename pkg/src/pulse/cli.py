"""Operator entry points: ingest, analyze, verify, record-fixtures, serve.

stdout carries only result summaries (JSON with --json, key=value lines
otherwise); everything else goes to stderr. Exit codes: 0 success,
1 domain error, 2 usage error.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path
from typing import List, Optional

from .cache import CacheStore
from .errors import PulseError
from .gateway import Gateway, PriceTable, ProviderConfig, estimate_cost
from .ingest import ingest_archive, load_corpus, write_corpus_csv
from .jsonio import read_json
from .pipeline import Pipeline, Theme
from .report import Report, verify_traceability

logger = logging.getLogger("pulse")

DEFAULT_ADDR = "127.0.0.1:8800"


def _print_summary(summary: dict, as_json: bool) -> None:
    if as_json:
        print(json.dumps(summary, sort_keys=True, ensure_ascii=False))
    else:
        for key, value in summary.items():
            print(f"{key}={value}")


def _build_gateway(mode: str, fixtures: Optional[str], provider: str = "http") -> Gateway:
    fixture_dir = Path(fixtures) if fixtures else None
    if mode in ("record", "replay") and fixture_dir is None:
        raise PulseError(f"--fixtures is required in {mode} mode")
    if mode == "record" and fixture_dir is not None:
        fixture_dir.mkdir(parents=True, exist_ok=True)
    config = ProviderConfig(mode=mode, fixture_dir=fixture_dir)
    transport = None
    if provider == "stub":
        from .stub import ScriptedModel

        transport = ScriptedModel()
    return Gateway(config, transport=transport)


def cmd_ingest(args: argparse.Namespace) -> int:
    parsed, aggregate = ingest_archive(
        Path(args.posts),
        Path(args.comments),
        fmt=args.format,
        dataset_id=args.dataset_id,
        source_label=args.source_label,
    )
    write_corpus_csv(aggregate.corpus, Path(args.out))
    _print_summary(
        {
            "posts": len(parsed.posts),
            "comments": len(parsed.comments),
            "skipped_posts": parsed.skipped_posts,
            "skipped_comments": parsed.skipped_comments,
            "threads": len(aggregate.corpus.threads),
            "attached_comments": aggregate.attached_comments,
            "orphaned_comments": aggregate.orphaned_comments,
            "duplicate_posts": aggregate.duplicate_posts,
            "source_label": aggregate.corpus.source_label,
            "out": str(args.out),
        },
        args.json,
    )
    return 0


def _run_analysis(args: argparse.Namespace, mode: str) -> int:
    corpus = load_corpus(Path(args.dataset))
    gateway = _build_gateway(mode, args.fixtures, provider=getattr(args, "provider", "http"))
    out_dir = Path(args.out)
    pipeline = Pipeline(
        gateway,
        CacheStore(out_dir / "cache"),
        reports_root=out_dir,
        model_id=args.model,
    )
    theme = Theme(title=args.theme, description=args.desc or "", origin="user_defined")

    if getattr(args, "topic", None):
        catalog = args.catalog or [corpus.source_label]
        ranked = pipeline.recommend_sources(args.topic, catalog)
        logger.info("recommended sources for %r: %s", args.topic, ranked)
    if getattr(args, "themes", False):
        pipeline.generate_themes(corpus)

    job = pipeline.run_report_job(corpus, theme)
    if job.phase != "done":
        print(f"analysis failed: {job.error}", file=sys.stderr)
        return 1

    report_data = read_json(pipeline.report_dir(job.report_id) / "report.json")
    cost = estimate_cost(
        gateway.usage_by_tag, PriceTable(args.price_in, args.price_out)
    )
    _print_summary(
        {
            "report_id": job.report_id,
            "phase": job.phase,
            "quotes": report_data["totals"]["quotes"],
            "traceable": report_data["totals"]["traceable"],
            "untraceable": report_data["totals"]["untraceable"],
            "warnings": len(report_data["provenance"]["warnings"]),
            "gateway_calls": gateway.call_count,
            "cost_total": round(cost.total, 6),
            "cost_per_stage": json.dumps(cost.per_stage, sort_keys=True),
            "out": str(out_dir / job.report_id),
        },
        args.json,
    )
    return 0


def cmd_analyze(args: argparse.Namespace) -> int:
    return _run_analysis(args, args.mode)


def cmd_record_fixtures(args: argparse.Namespace) -> int:
    return _run_analysis(args, "record")


def cmd_verify(args: argparse.Namespace) -> int:
    report = Report.from_dict(read_json(Path(args.report) / "report.json"))
    corpus = load_corpus(Path(args.dataset))
    annotated, mismatches = verify_traceability(report, corpus)
    _print_summary(
        {
            "report_id": annotated.report_id,
            "quotes": annotated.totals.quotes,
            "traceable": annotated.totals.traceable,
            "untraceable": annotated.totals.untraceable,
            "mismatches": json.dumps(mismatches, sort_keys=True, ensure_ascii=False),
        },
        args.json,
    )
    return 0 if annotated.totals.untraceable == 0 else 1


def cmd_serve(args: argparse.Namespace) -> int:
    import uvicorn

    from .service import AppState, create_app

    host, _, port = args.addr.rpartition(":")
    transport = None
    if args.provider == "stub":
        from .stub import ScriptedModel

        transport = ScriptedModel()
    state = AppState.build(
        Path(args.data_root),
        mode=args.mode,
        fixture_dir=Path(args.fixtures) if args.fixtures else None,
        model_id=args.model,
        transport=transport,
    )
    uvicorn.run(create_app(state), host=host or "127.0.0.1", port=int(port))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pulse",
        description="Turn forum-archive discussions into structured research reports.",
    )
    parser.add_argument("--json", action="store_true", help="print summaries as JSON")
    sub = parser.add_subparsers(dest="command", required=True)

    p_ingest = sub.add_parser("ingest", help="decode archive dumps into a corpus CSV")
    p_ingest.add_argument("--posts", required=True)
    p_ingest.add_argument("--comments", required=True)
    p_ingest.add_argument("--out", required=True)
    p_ingest.add_argument("--format", default="auto", choices=["auto", "ndjson", "zst"])
    p_ingest.add_argument("--dataset-id", default=None)
    p_ingest.add_argument("--source-label", default=None)
    p_ingest.set_defaults(func=cmd_ingest)

    def add_analysis_args(p, with_mode: bool):
        p.add_argument("--dataset", required=True, help="corpus CSV file")
        p.add_argument("--theme", required=True, help="theme title")
        p.add_argument("--desc", default="", help="theme description")
        if with_mode:
            p.add_argument("--mode", default="replay", choices=["replay", "live", "record"])
        p.add_argument("--fixtures", default=os.environ.get("PULSE_FIXTURE_DIR"))
        p.add_argument("--out", required=True, help="output directory")
        p.add_argument("--model", default="gpt-4")
        p.add_argument("--provider", default="http", choices=["http", "stub"])
        p.add_argument("--topic", default=None, help="also run source recommendation")
        p.add_argument("--catalog", nargs="*", default=None)
        p.add_argument("--themes", action="store_true", help="also run theme generation")
        p.add_argument("--price-in", type=float, default=30.0, help="per 1M input tokens")
        p.add_argument("--price-out", type=float, default=60.0, help="per 1M output tokens")

    p_analyze = sub.add_parser("analyze", help="run the full analysis job offline")
    add_analysis_args(p_analyze, with_mode=True)
    p_analyze.set_defaults(func=cmd_analyze)

    p_record = sub.add_parser(
        "record-fixtures", help="run the pipeline in record mode to build fixtures"
    )
    add_analysis_args(p_record, with_mode=False)
    p_record.set_defaults(func=cmd_record_fixtures)

    p_verify = sub.add_parser("verify", help="audit report quote traceability")
    p_verify.add_argument("--report", required=True, help="report output directory")
    p_verify.add_argument("--dataset", required=True, help="corpus CSV file")
    p_verify.set_defaults(func=cmd_verify)

    p_serve = sub.add_parser("serve", help="run the REST service")
    p_serve.add_argument("--addr", default=os.environ.get("PULSE_ADDR", DEFAULT_ADDR))
    p_serve.add_argument(
        "--data-root", default=os.environ.get("PULSE_DATA_DIR", "./pulse-data")
    )
    p_serve.add_argument(
        "--mode",
        default=os.environ.get("PULSE_PROVIDER_MODE", "replay"),
        choices=["replay", "live", "record"],
    )
    p_serve.add_argument("--fixtures", default=os.environ.get("PULSE_FIXTURE_DIR"))
    p_serve.add_argument("--model", default="gpt-4")
    p_serve.add_argument("--provider", default="http", choices=["http", "stub"])
    p_serve.set_defaults(func=cmd_serve)

    return parser


def main(argv: Optional[List[str]] = None) -> int:
    logging.basicConfig(
        stream=sys.stderr, level=logging.INFO, format="%(levelname)s %(name)s: %(message)s"
    )
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except PulseError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
