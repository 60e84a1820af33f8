"""Command-line entry points: ingest, catalog, exemplars, eval, serve."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from transit_agent.catalog import build_prompt_document, describe_database, render_prompt
from transit_agent.config import AppConfig, build_provider, load_config
from transit_agent.evaluation.grading import grade_all
from transit_agent.evaluation.report import render_text, summarize
from transit_agent.evaluation.runner import run_suite
from transit_agent.evaluation.templates import ExpansionConfig, expand_templates
from transit_agent.exemplars import ExemplarStore, load_exemplars, save_index
from transit_agent.ingest import (
    assign_stop_municipality,
    build_database,
    load_municipalities,
    normalize_keys,
    parse_feed,
)
from transit_agent.ingest.database import DatabaseHandle
from transit_agent.runstore import RunStore
from transit_agent.service import serve

logger = logging.getLogger(__name__)


def ingest_feeds(feed_dirs, tags, municipalities_path, db_path) -> DatabaseHandle:
    """Full ingest pipeline: parse, normalize, enrich stops, load."""
    municipalities = load_municipalities(municipalities_path)
    bundles = []
    for directory, tag in zip(feed_dirs, tags):
        bundle = normalize_keys(parse_feed(directory, tag))
        bundle.files["stops"] = assign_stop_municipality(bundle.stops, municipalities)
        bundles.append(bundle)
    return build_database(bundles, municipalities, db_path)


def _cmd_ingest(args) -> int:
    if len(args.feed) != len(args.tag):
        print("error: each --feed needs a matching --tag", file=sys.stderr)
        return 2
    db = ingest_feeds(args.feed, args.tag, args.municipalities, args.db)
    violations = db.foreign_key_violations()
    if violations:
        print(f"error: {len(violations)} foreign-key violations after load", file=sys.stderr)
        return 1
    print(f"ingested {len(args.feed)} feed(s) into {args.db}")
    return 0


def _cmd_catalog_render(args) -> int:
    db = DatabaseHandle(args.db)
    catalog = describe_database(db, args.annotations)
    text = render_prompt(build_prompt_document(catalog), char_limit=args.char_limit)
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
        print(f"wrote {len(text)} chars to {args.out}")
    else:
        print(text, end="")
    return 0


def _cmd_exemplars_build_index(args) -> int:
    config = load_config(args.config) if args.config else AppConfig()
    if args.db:
        config.db_path = args.db
    if args.exemplars:
        config.exemplars_path = args.exemplars
    if args.annotations:
        config.annotations_path = args.annotations
    db = DatabaseHandle(config.db_path)
    catalog = describe_database(db, config.annotations_path) if config.annotations_path else None
    pairs = load_exemplars(config.exemplars_path, catalog)
    provider = build_provider(config)
    store = ExemplarStore(pairs)
    index = store.index_for(provider)
    out = args.out or (str(Path(config.exemplars_path).with_suffix(".index.json")))
    save_index(index, out)
    print(f"indexed {len(pairs)} exemplars -> {out}")
    return 0


def _cmd_eval_expand(args) -> int:
    config = load_config(args.config) if args.config else AppConfig()
    if args.db:
        config.db_path = args.db
    if args.runstore:
        config.runstore_path = args.runstore
    db = DatabaseHandle(config.db_path)
    expansion = ExpansionConfig(seed=args.seed)
    if args.counts:
        expansion.counts = {k: int(v) for k, v in (part.split("=") for part in args.counts.split(","))}
    if args.rider_probability is not None:
        expansion.rider_probability = args.rider_probability
    if args.invalid_probability is not None:
        expansion.invalid_probability = args.invalid_probability
    if args.paraphrase:
        expansion.paraphrase = args.paraphrase
    provider = build_provider(config) if expansion.paraphrase == "provider" else None
    questions, gold = expand_templates(db, expansion, provider)
    store = RunStore(config.runstore_path)
    store.replace_questions([q.to_dict() for q in questions], [g.to_dict() for g in gold])
    print(f"expanded {len(questions)} questions into {config.runstore_path}")
    return 0


def _cmd_eval_run(args) -> int:
    config = load_config(args.config) if args.config else AppConfig()
    if args.runstore:
        config.runstore_path = args.runstore
    store = RunStore(config.runstore_path)
    questions = store.list_questions()
    if not questions:
        print("error: no questions in the run store; run `eval expand` first", file=sys.stderr)
        return 2
    store.clear_runs()
    records = run_suite(
        questions,
        args.endpoint,
        repeats=args.repeats,
        runstore=store,
        parallelism=args.parallelism,
    )
    print(f"stored {len(records)} run records")
    return 0


def _cmd_eval_grade(args) -> int:
    config = load_config(args.config) if args.config else AppConfig()
    if args.db:
        config.db_path = args.db
    if args.runstore:
        config.runstore_path = args.runstore
    store = RunStore(config.runstore_path)
    db = DatabaseHandle(config.db_path)
    graded = grade_all(store, db, tolerance=args.tolerance)
    print(f"graded {graded} runs")
    return 0


def _cmd_eval_report(args) -> int:
    config = load_config(args.config) if args.config else AppConfig()
    if args.runstore:
        config.runstore_path = args.runstore
    store = RunStore(config.runstore_path)
    summary = summarize(store.list_outcomes())
    if args.format == "json":
        print(json.dumps(summary.to_json_dict(), indent=2, sort_keys=True))
    else:
        print(render_text(summary))
    return 0


def _cmd_serve(args) -> int:
    config = load_config(args.config)
    if args.db:
        config.db_path = args.db
    serve(config, args.host, args.port)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="transit-agent")
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    p_ingest = sub.add_parser("ingest", help="parse feeds and build the database")
    p_ingest.add_argument("--feed", action="append", required=True, help="feed directory (repeatable)")
    p_ingest.add_argument("--tag", action="append", required=True, help="agency tag for the matching --feed")
    p_ingest.add_argument("--municipalities", required=True, help="boundary GeoJSON file")
    p_ingest.add_argument("--db", required=True, help="output SQLite path")
    p_ingest.set_defaults(fn=_cmd_ingest)

    p_catalog = sub.add_parser("catalog", help="schema catalog operations")
    catalog_sub = p_catalog.add_subparsers(dest="subcommand", required=True)
    p_render = catalog_sub.add_parser("render", help="render the generation prompt")
    p_render.add_argument("--db", required=True)
    p_render.add_argument("--annotations", required=True)
    p_render.add_argument("--out")
    p_render.add_argument("--char-limit", type=int, default=None)
    p_render.set_defaults(fn=_cmd_catalog_render)

    p_exemplars = sub.add_parser("exemplars", help="exemplar store operations")
    ex_sub = p_exemplars.add_subparsers(dest="subcommand", required=True)
    p_index = ex_sub.add_parser("build-index", help="embed exemplars and save the index")
    p_index.add_argument("--db", required=True)
    p_index.add_argument("--exemplars")
    p_index.add_argument("--annotations")
    p_index.add_argument("--config")
    p_index.add_argument("--out")
    p_index.set_defaults(fn=_cmd_exemplars_build_index)

    p_eval = sub.add_parser("eval", help="evaluation harness")
    eval_sub = p_eval.add_subparsers(dest="subcommand", required=True)

    p_expand = eval_sub.add_parser("expand", help="expand templates with database values")
    p_expand.add_argument("--seed", type=int, required=True)
    p_expand.add_argument("--config")
    p_expand.add_argument("--db")
    p_expand.add_argument("--runstore")
    p_expand.add_argument("--counts", help="per-template counts, e.g. T1=4,T2=4,T3=4")
    p_expand.add_argument("--rider-probability", type=float, default=None)
    p_expand.add_argument("--invalid-probability", type=float, default=None)
    p_expand.add_argument("--paraphrase", choices=("off", "provider"))
    p_expand.set_defaults(fn=_cmd_eval_expand)

    p_run = eval_sub.add_parser("run", help="ask the expanded questions via the API")
    p_run.add_argument("--endpoint", required=True)
    p_run.add_argument("--repeats", type=int, default=1)
    p_run.add_argument("--config")
    p_run.add_argument("--runstore")
    p_run.add_argument("--parallelism", type=int, default=1)
    p_run.set_defaults(fn=_cmd_eval_run)

    p_grade = eval_sub.add_parser("grade", help="grade stored runs against gold queries")
    p_grade.add_argument("--config")
    p_grade.add_argument("--db")
    p_grade.add_argument("--runstore")
    p_grade.add_argument("--tolerance", type=float, default=1e-6)
    p_grade.set_defaults(fn=_cmd_eval_grade)

    p_report = eval_sub.add_parser("report", help="summarize graded outcomes")
    p_report.add_argument("--format", choices=("json", "text"), default="text")
    p_report.add_argument("--config")
    p_report.add_argument("--runstore")
    p_report.set_defaults(fn=_cmd_eval_report)

    p_serve = sub.add_parser("serve", help="start the HTTP API")
    p_serve.add_argument("--db")
    p_serve.add_argument("--config", required=True)
    p_serve.add_argument("--port", type=int, default=8080)
    p_serve.add_argument("--host", default="127.0.0.1")
    p_serve.set_defaults(fn=_cmd_serve)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
    )
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())
