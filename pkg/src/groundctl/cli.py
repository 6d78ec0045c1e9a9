"""Command-line interface mirroring the HTTP endpoints."""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .embed import LocalDeterministicEmbedder
from .errors import GroundctlError, ScriptSyntaxError
from .evaluation import (
    ARM_ALIASES,
    DEFAULT_SEEDS,
    check_failure_ordering,
    render_report,
    run_suite,
    summarize,
)
from .executor import execute, load_fixture, resolution_stats
from .gen import GeneratorKind, generate, parse_script, plan_steps, to_selenium_python
from .ingest import ChunkingConfig, ingest_corpus, load_directory
from .rag import RetrievalConfig, construct_prompt, retrieve_context
from .store import VectorStore, embed_chunks

DEFAULT_STORE = Path("groundctl.store")


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ScriptSyntaxError as exc:
        print(f"syntax error: {exc}", file=sys.stderr)
        return 2
    except GroundctlError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="groundctl",
        description="Grounded test-script generation over an indexed knowledge base",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="index a directory of documents")
    p.add_argument("--dir", type=Path, required=True)
    p.add_argument("--chunk-size", type=int, default=1000)
    p.add_argument("--overlap", type=int, default=200)
    p.add_argument("--store", type=Path, default=DEFAULT_STORE)
    p.set_defaults(func=_cmd_ingest)

    p = sub.add_parser("gen-cases", help="generate natural-language test steps")
    p.add_argument("query")
    _gen_options(p)
    p.set_defaults(func=_cmd_gen_cases)

    p = sub.add_parser("gen-script", help="generate an action-DSL script")
    p.add_argument("query")
    _gen_options(p)
    p.add_argument("--out", type=Path, help="write the script to a file")
    p.set_defaults(func=_cmd_gen_script)

    p = sub.add_parser("exec", help="execute a script against the fixture")
    p.add_argument("--script", type=Path, required=True)
    p.add_argument("--fixture", type=Path, default=None)
    p.add_argument("--scenario", type=int, default=None, help="check this scenario's goals")
    p.set_defaults(func=_cmd_exec)

    p = sub.add_parser("export", help="transpile a script to another format")
    p.add_argument("--script", type=Path, required=True)
    p.add_argument("--format", choices=["selenium-python"], default="selenium-python")
    p.set_defaults(func=_cmd_export)

    p = sub.add_parser("eval", help="run the evaluation suite")
    p.add_argument("--arms", default="grounded,ungrounded")
    p.add_argument("--seeds", default=",".join(str(s) for s in DEFAULT_SEEDS))
    p.add_argument("--out", type=Path, default=Path("report"))
    p.add_argument("--fixture", type=Path, default=None)
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("serve", help="start the HTTP service")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8080)
    p.add_argument("--store", type=Path, default=None)
    p.add_argument("--fixture", type=Path, default=None)
    p.add_argument("--webui", type=Path, default=None)
    p.add_argument("--dump-schema", action="store_true",
                   help="print the OpenAPI schema and exit")
    p.set_defaults(func=_cmd_serve)

    return parser


def _gen_options(p: argparse.ArgumentParser) -> None:
    p.add_argument("--store", type=Path, default=DEFAULT_STORE)
    p.add_argument("--generator", default="grounded", choices=sorted(ARM_ALIASES))
    p.add_argument("--k", type=int, default=3)
    p.add_argument("--budget", type=int, default=8000)
    p.add_argument("--fixture", type=Path, default=None)


def _cmd_ingest(args) -> int:
    docs = load_directory(args.dir)
    if not docs:
        print(f"no ingestable files in {args.dir}", file=sys.stderr)
        return 1
    cfg = ChunkingConfig(chunk_size=args.chunk_size, overlap=args.overlap)
    corpus = ingest_corpus(docs, cfg)
    embedder = LocalDeterministicEmbedder()
    store = (
        VectorStore.load(args.store) if args.store.exists() else VectorStore(embedder.dim)
    )
    store.upsert(embed_chunks(corpus.chunks, embedder))
    store.persist(args.store)
    print(f"indexed {len(corpus.chunks)} chunks from {len(docs)} documents -> {args.store}")
    return 0


def _prepare_generation(args):
    embedder = LocalDeterministicEmbedder()
    store = VectorStore.load(args.store)
    cfg = RetrievalConfig(k=args.k, char_budget=args.budget)
    ctx = retrieve_context(args.query, store, embedder, cfg)
    prompt = construct_prompt(ctx, cfg)
    return prompt, ARM_ALIASES[args.generator]


def _cmd_gen_cases(args) -> int:
    prompt, kind = _prepare_generation(args)
    for i, step in enumerate(plan_steps(prompt, kind), start=1):
        print(f"{i}. {step}")
    return 0


def _cmd_gen_script(args) -> int:
    prompt, kind = _prepare_generation(args)
    raw = generate(prompt, kind)
    script = parse_script(raw)
    bundle = load_fixture(args.fixture)
    stats = resolution_stats(script, bundle.index, bundle.manifest)
    if args.out:
        args.out.write_text(raw + "\n", encoding="utf-8")
        print(f"wrote {args.out}")
    else:
        print(raw)
    rate = "n/a" if stats.rate is None else f"{stats.rate:.0%}"
    print(f"# grounding: {stats.resolved}/{stats.total} resolved ({rate})", file=sys.stderr)
    return 0


def _cmd_exec(args) -> int:
    bundle = load_fixture(args.fixture)
    script = parse_script(args.script.read_text(encoding="utf-8"))
    goals = ()
    if args.scenario is not None:
        goals = bundle.manifest.scenario(args.scenario).goals
    trace = execute(script, bundle.manifest, bundle.index, goals=goals)
    for ts in trace.steps:
        mark = "ok" if ts.outcome.value == "resolved" else ts.outcome.value
        detail = f"  ({ts.detail})" if ts.detail else ""
        print(f"[{mark:>14}] {ts.step.render()}{detail}")
    print(f"final page: {trace.final_page}  state: {json.dumps(trace.final_state)}")
    print(f"goal_met: {trace.goal_met}  execution_success: {trace.execution_success}")
    return 0 if trace.execution_success else 1


def _cmd_export(args) -> int:
    script = parse_script(args.script.read_text(encoding="utf-8"))
    print(to_selenium_python(script))
    return 0


def _cmd_eval(args) -> int:
    arm_names = [a.strip() for a in args.arms.split(",") if a.strip()]
    unknown = [a for a in arm_names if a not in ARM_ALIASES]
    if unknown:
        print(f"unknown arms: {unknown}; known: {sorted(ARM_ALIASES)}", file=sys.stderr)
        return 1
    arms = [ARM_ALIASES[a] for a in arm_names]
    seeds = [int(s) for s in args.seeds.split(",") if s.strip()]
    bundle = load_fixture(args.fixture)
    embedder = LocalDeterministicEmbedder()
    from .rag import build_knowledge_base

    store = build_knowledge_base(bundle.documents, embedder)
    result = run_suite(arms, seeds, bundle, store, embedder)
    check_failure_ordering(result.records)
    summary = summarize(result.records)
    paths = render_report(summary, args.out, result.records)
    for incomplete in result.incomplete:
        print(f"incomplete: {incomplete}", file=sys.stderr)
    print(f"{len(result.records)} records in {result.elapsed_s:.1f}s")
    for name, path in paths.items():
        print(f"  {name}: {path}")
    return 0


def _cmd_serve(args) -> int:
    from .api import ServiceConfig, create_app

    config = ServiceConfig(
        host=args.host,
        port=args.port,
        store_path=args.store,
        fixture_dir=args.fixture,
        webui_dir=args.webui,
    )
    app = create_app(config)
    if args.dump_schema:
        print(json.dumps(app.openapi(), indent=2))
        return 0
    import uvicorn

    uvicorn.run(app, host=args.host, port=args.port)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
