"""HTTP service exposing the pipeline.

Endpoints mirror the interactive workflow: ingest documents into the
knowledge base, generate natural-language test cases, generate a
grounded script with a selector-resolution preview, execute a script
against the fixture simulator, and launch asynchronous evaluation jobs.
Every error is a uniform JSON envelope {code, message, detail}.

Under mock generators the service is deterministic for a given store
state; job ids and timing fields are the only varying surface.
"""
from __future__ import annotations

import threading
import traceback
import uuid
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from fastapi import FastAPI, Request, UploadFile
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel, Field

from .dom import clean_html
from .embed import LocalDeterministicEmbedder
from .errors import (
    EmptyKnowledgeBaseError,
    GroundctlError,
    IngestError,
    ProviderError,
    ScriptSyntaxError,
)
from .evaluation import (
    ARM_ALIASES,
    DEFAULT_SEEDS,
    run_suite,
    summarize,
    summary_to_json,
)
from .executor import FixtureBundle, execute, load_fixture, resolution_stats
from .gen import GeneratorKind, generate, parse_script, plan_steps
from .ingest import (
    ChunkingConfig,
    SourceDocument,
    SourceType,
    ingest_corpus,
)
from .rag import RetrievalConfig, construct_prompt, retrieve_context
from .store import VectorStore, embed_chunks


@dataclass
class ServiceConfig:
    host: str = "127.0.0.1"
    port: int = 8080
    store_path: Path | None = None  # persisted after every ingest when set
    fixture_dir: Path | None = None  # bundled fixture when None
    default_generator: GeneratorKind = GeneratorKind.MOCK_GROUNDED
    chunking: ChunkingConfig = field(default_factory=ChunkingConfig)
    retrieval: RetrievalConfig = field(default_factory=RetrievalConfig)
    cors_origins: tuple[str, ...] = ("*",)
    webui_dir: Path | None = None
    eval_workers: int = 2


class ApiError(Exception):
    def __init__(self, status: int, code: str, message: str, detail: object = None):
        super().__init__(message)
        self.status = status
        self.code = code
        self.message = message
        self.detail = detail

    def response(self) -> JSONResponse:
        return JSONResponse(
            status_code=self.status,
            content={"code": self.code, "message": self.message, "detail": self.detail},
        )


class IngestDoc(BaseModel):
    name: str
    type: str
    content: str


class IngestBody(BaseModel):
    documents: list[IngestDoc] = Field(min_length=1)


class QueryBody(BaseModel):
    query: str = Field(min_length=1)
    generator: str | None = None
    k: int | None = None
    char_budget: int | None = None


class ExecuteBody(BaseModel):
    script: str
    scenario_id: int | None = None


class EvaluateBody(BaseModel):
    arms: list[str] = Field(min_length=1)
    seeds: list[int] = Field(default=list(DEFAULT_SEEDS))


@dataclass
class EvalJob:
    job_id: str
    status: str = "pending"  # pending | running | done | failed
    arms: list[str] = field(default_factory=list)
    seeds: list[int] = field(default_factory=list)
    error: str | None = None
    report: dict | None = None
    records: list[dict] = field(default_factory=list)
    incomplete: list[str] = field(default_factory=list)


class ServiceState:
    """Shared mutable state behind the endpoints."""

    def __init__(self, config: ServiceConfig):
        self.config = config
        self.embedder = LocalDeterministicEmbedder()
        self.bundle: FixtureBundle = load_fixture(config.fixture_dir)
        self.store = VectorStore(dim=self.embedder.dim)
        self.sources: dict[str, dict] = {}
        self.collisions: list[dict] = []
        self.ingest_lock = threading.Lock()
        self.jobs: dict[str, EvalJob] = {}
        self.jobs_lock = threading.Lock()
        self.pool = ThreadPoolExecutor(max_workers=config.eval_workers)

    def generator_kind(self, name: str | None) -> GeneratorKind:
        if name is None:
            return self.config.default_generator
        key = name.strip().lower()
        if key in ARM_ALIASES:
            return ARM_ALIASES[key]
        try:
            return GeneratorKind(key)
        except ValueError:
            raise ApiError(
                400, "unknown_generator", f"unknown generator {name!r}",
                {"known": sorted(ARM_ALIASES)},
            ) from None

    def retrieval_cfg(self, body: QueryBody) -> RetrievalConfig:
        base = self.config.retrieval
        return RetrievalConfig(
            k=body.k or base.k,
            char_budget=body.char_budget or base.char_budget,
            per_type_minimum=base.per_type_minimum,
        )

    def require_store(self) -> None:
        if len(self.store) == 0:
            raise ApiError(
                409, "empty_knowledge_base",
                "the knowledge base is empty; ingest documents first",
            )

    def ingest_documents(self, docs: list[SourceDocument]) -> dict:
        with self.ingest_lock:
            for doc in docs:
                if doc.source_id in self.sources:
                    raise ApiError(
                        400, "duplicate_source",
                        f"source {doc.source_id!r} already ingested",
                    )
            try:
                corpus = ingest_corpus(docs, self.config.chunking)
            except IngestError as exc:
                raise ApiError(422, "malformed_document", str(exc)) from exc
            collisions = []
            for doc in docs:
                if doc.source_type == SourceType.HTML:
                    cleaned = clean_html(doc.raw_bytes, doc.source_id)
                    seen: dict[str, int] = {}
                    for el in cleaned.elements:
                        if el.id_attr:
                            seen[el.id_attr] = seen.get(el.id_attr, 0) + 1
                    collisions.extend(
                        {"source": doc.source_id, "id": id_attr, "count": count}
                        for id_attr, count in seen.items()
                        if count > 1
                    )
            self.store.upsert(embed_chunks(corpus.chunks, self.embedder))
            for doc in docs:
                n = sum(1 for c in corpus.chunks if c.source_id == doc.source_id)
                self.sources[doc.source_id] = {
                    "source_id": doc.source_id,
                    "type": doc.source_type.value,
                    "chunks": n,
                }
            self.collisions.extend(collisions)
            if self.config.store_path is not None:
                try:
                    self.store.persist(self.config.store_path)
                except OSError as exc:
                    raise ApiError(
                        507, "persistence_failure", f"could not persist store: {exc}"
                    ) from exc
            return {
                "chunks_indexed": len(corpus.chunks),
                "collisions": collisions,
            }


_TYPE_ALIASES = {
    "markdown": SourceType.MARKDOWN,
    "md": SourceType.MARKDOWN,
    "text": SourceType.TEXT,
    "txt": SourceType.TEXT,
    "json": SourceType.JSON,
    "html": SourceType.HTML,
    "htm": SourceType.HTML,
}

_EXT_TO_TYPE = {
    ".md": SourceType.MARKDOWN,
    ".txt": SourceType.TEXT,
    ".json": SourceType.JSON,
    ".html": SourceType.HTML,
    ".htm": SourceType.HTML,
}


def _source_type(name: str, declared: str | None) -> SourceType:
    if declared:
        key = declared.strip().lower()
        if key not in _TYPE_ALIASES:
            raise ApiError(
                400, "unsupported_type", f"unsupported document type {declared!r}",
                {"supported": sorted(set(_TYPE_ALIASES))},
            )
        return _TYPE_ALIASES[key]
    ext = Path(name).suffix.lower()
    if ext not in _EXT_TO_TYPE:
        raise ApiError(
            400, "unsupported_type", f"cannot infer type from {name!r}",
            {"supported_extensions": sorted(_EXT_TO_TYPE)},
        )
    return _EXT_TO_TYPE[ext]


def create_app(config: ServiceConfig | None = None) -> FastAPI:
    config = config or ServiceConfig()
    state = ServiceState(config)
    app = FastAPI(title="groundctl", version="0.1.0")
    app.state.service = state
    app.add_middleware(
        CORSMiddleware,
        allow_origins=list(config.cors_origins),
        allow_methods=["*"],
        allow_headers=["*"],
    )

    @app.exception_handler(ApiError)
    async def _api_error(_req: Request, exc: ApiError):
        return exc.response()

    @app.exception_handler(GroundctlError)
    async def _groundctl_error(_req: Request, exc: GroundctlError):
        return ApiError(500, "internal_error", str(exc)).response()

    @app.post("/ingest")
    def ingest(body: IngestBody) -> dict:
        docs = []
        for item in body.documents:
            stype = _source_type(item.name, item.type)
            docs.append(
                SourceDocument(
                    source_id=Path(item.name).stem,
                    source_type=stype,
                    raw_bytes=item.content.encode("utf-8"),
                    origin=item.name,
                )
            )
        names = [d.source_id for d in docs]
        dupes = {n for n in names if names.count(n) > 1}
        if dupes:
            raise ApiError(
                400, "duplicate_source", f"duplicate source name(s): {sorted(dupes)}"
            )
        return state.ingest_documents(docs)

    @app.post("/ingest-files")
    async def ingest_files(files: list[UploadFile]) -> dict:
        """Multipart variant of /ingest for browser upload forms."""
        if not files:
            raise ApiError(422, "malformed_body", "no files supplied")
        docs = []
        for f in files:
            name = f.filename or "upload"
            stype = _source_type(name, None)
            docs.append(
                SourceDocument(
                    source_id=Path(name).stem,
                    source_type=stype,
                    raw_bytes=await f.read(),
                    origin=name,
                )
            )
        return state.ingest_documents(docs)

    @app.get("/stats")
    def stats() -> dict:
        return {
            "chunks": len(state.store),
            "by_type": state.store.source_types(),
            "sources": sorted(state.sources.values(), key=lambda s: s["source_id"]),
            "dim": state.store.dim,
            "collisions": state.collisions,
            "fixture_pages": state.bundle.index.page_ids(),
        }

    @app.post("/generate-test-cases")
    def generate_test_cases(body: QueryBody) -> dict:
        state.require_store()
        cfg = state.retrieval_cfg(body)
        kind = state.generator_kind(body.generator)
        ctx = retrieve_context(body.query, state.store, state.embedder, cfg)
        prompt = construct_prompt(ctx, cfg)
        try:
            steps = plan_steps(prompt, kind)
        except ProviderError as exc:
            raise _provider_error(exc) from exc
        return {
            "steps": [f"{i}. {text}" for i, text in enumerate(steps, start=1)],
            "retrieved": _retrieved_summary(ctx),
        }

    @app.post("/generate-script")
    def generate_script(body: QueryBody) -> dict:
        state.require_store()
        cfg = state.retrieval_cfg(body)
        kind = state.generator_kind(body.generator)
        ctx = retrieve_context(body.query, state.store, state.embedder, cfg)
        prompt = construct_prompt(ctx, cfg)
        try:
            raw = generate(prompt, kind)
        except ProviderError as exc:
            raise _provider_error(exc) from exc
        try:
            script = parse_script(raw)
        except ScriptSyntaxError as exc:
            return {
                "script": raw,
                "parsed": None,
                "syntax_error": {"line": exc.line_no, "reason": exc.reason},
                "grounding": None,
                "retrieved": _retrieved_summary(ctx),
            }
        stats_ = resolution_stats(script, state.bundle.index, state.bundle.manifest)
        return {
            "script": raw,
            "parsed": [_step_json(s) for s in script.steps],
            "grounding": _grounding_json(stats_),
            "retrieved": _retrieved_summary(ctx),
        }

    @app.post("/execute")
    def execute_script(body: ExecuteBody) -> dict:
        try:
            script = parse_script(body.script)
        except ScriptSyntaxError as exc:
            raise ApiError(
                400, "syntax_error", str(exc),
                {"line": exc.line_no, "reason": exc.reason},
            ) from exc
        goals = ()
        if body.scenario_id is not None:
            try:
                goals = state.bundle.manifest.scenario(body.scenario_id).goals
            except KeyError as exc:
                raise ApiError(400, "unknown_scenario", str(exc)) from exc
        trace = execute(script, state.bundle.manifest, state.bundle.index, goals=goals)
        return {
            "steps": [
                {
                    "line": ts.step.line_no,
                    "action": ts.step.action.value,
                    "outcome": ts.outcome.value,
                    "page": ts.page_id,
                    "detail": ts.detail,
                }
                for ts in trace.steps
            ],
            "final_state": trace.final_state,
            "final_page": trace.final_page,
            "goal_met": trace.goal_met,
            "execution_success": trace.execution_success,
        }

    @app.post("/evaluate")
    def evaluate(body: EvaluateBody) -> dict:
        state.require_store()
        kinds = [state.generator_kind(a) for a in body.arms]
        job = EvalJob(
            job_id=uuid.uuid4().hex, arms=[k.value for k in kinds], seeds=body.seeds
        )
        with state.jobs_lock:
            state.jobs[job.job_id] = job
        state.pool.submit(_run_job, state, job, kinds, body.seeds)
        return {"job_id": job.job_id, "status": job.status}

    @app.get("/evaluate/{job_id}")
    def evaluate_status(job_id: str) -> dict:
        with state.jobs_lock:
            job = state.jobs.get(job_id)
        if job is None:
            raise ApiError(404, "unknown_job", f"no job {job_id!r}")
        out = {
            "job_id": job.job_id,
            "status": job.status,
            "arms": job.arms,
            "seeds": job.seeds,
        }
        if job.status == "failed":
            out["error"] = job.error
        if job.status == "done":
            out["report"] = job.report
            out["records"] = job.records
            out["incomplete"] = job.incomplete
        return out

    if config.webui_dir is not None and config.webui_dir.is_dir():
        app.mount("/", StaticFiles(directory=config.webui_dir, html=True), name="webui")

    return app


def _provider_error(exc: ProviderError) -> ApiError:
    return ApiError(
        502, "provider_failure", str(exc), {"retryable": exc.retryable}
    )


def _retrieved_summary(ctx) -> list[dict]:
    return [
        {
            "chunk_id": s.chunk.chunk_id,
            "source_type": s.chunk.source_type.value,
            "score": s.score,
            "rank": s.rank,
        }
        for s in ctx.all_chunks()
    ]


def _step_json(step) -> dict:
    return {
        "line": step.line_no,
        "action": step.action.value,
        "locator": step.locator.render() if step.locator else None,
        "page": step.page_id,
        "value": step.value,
        "timeout_ms": step.timeout_ms,
        "state_key": step.state_key,
        "expected": step.expected,
        "text": step.render(),
    }


def _grounding_json(stats) -> dict:
    return {
        "resolved": stats.resolved,
        "total": stats.total,
        "rate": stats.rate,
        "steps": [
            {
                "line": sr.line_no,
                "locator": sr.locator.render(),
                "page": sr.page_id,
                "outcome": sr.outcome.value,
                "counted": sr.counted,
            }
            for sr in stats.steps
        ],
    }


def _run_job(state: ServiceState, job: EvalJob, kinds, seeds) -> None:
    with state.jobs_lock:
        job.status = "running"
    try:
        result = run_suite(
            kinds, seeds, state.bundle, state.store, state.embedder,
            state.config.retrieval,
        )
        summary = summarize(result.records)
        with state.jobs_lock:
            job.report = summary_to_json(summary)
            job.records = [r.to_json() for r in result.records]
            job.incomplete = result.incomplete
            job.status = "done"
    except Exception as exc:  # job isolation: a failed run never kills the pool
        with state.jobs_lock:
            job.error = f"{exc}\n{traceback.format_exc()}"
            job.status = "failed"
