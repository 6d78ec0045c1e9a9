"""Retrieval, context partitioning, and prompt construction.

The pipeline per query: embed the query, pull the top-k chunks, split
them into documentation context and HTML-structure context, backfill a
starved partition with one type-filtered retrieval, and render the
constrained prompt. Intent extraction is a deterministic verb-lexicon
heuristic; it only informs page-hint selection downstream.
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field, replace
from importlib import resources

from .embed import EmbeddingVector
from .errors import EmptyKnowledgeBaseError, PromptBudgetError
from .ingest import ChunkingConfig, DocumentChunk, SourceDocument, SourceType, ingest_corpus
from .store import VectorStore, build_store

TEMPLATE_VERSION = "v1"

DOC_TYPES = {SourceType.MARKDOWN, SourceType.TEXT, SourceType.JSON}

DEFAULT_CONSTRAINTS = (
    "Use ONLY IDs from HTML structure",
    "Add wait_for before every interaction",
)

# Action verbs recognized by intent extraction; matches the verbs the
# fixture scenarios lead with.
INTENT_VERBS = frozenset(
    {"add", "remove", "update", "search", "navigate", "complete", "apply",
     "sort", "filter", "view", "write", "share", "cancel"}
)

_WORD_RE = re.compile(r"[a-z0-9]+")
_QUOTED_RE = re.compile(r'"([^"]+)"')


@dataclass(frozen=True)
class RetrievalConfig:
    k: int = 3
    char_budget: int = 8000
    per_type_minimum: int = 1

    def __post_init__(self) -> None:
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if not 1 <= self.per_type_minimum <= self.k:
            raise ValueError("per_type_minimum must be in [1, k]")


@dataclass(frozen=True)
class ScoredChunk:
    chunk: DocumentChunk
    score: float
    rank: int


@dataclass
class RetrievedContext:
    query: str
    doc_chunks: list[ScoredChunk] = field(default_factory=list)
    html_chunks: list[ScoredChunk] = field(default_factory=list)

    def all_chunks(self) -> list[ScoredChunk]:
        return sorted(self.doc_chunks + self.html_chunks, key=lambda s: s.rank)


def retrieve_context(
    query: str,
    store: VectorStore,
    embedder,
    cfg: RetrievalConfig | None = None,
) -> RetrievedContext:
    """Top-k retrieval partitioned by chunk type, with per-type backfill.

    A single k-chunk retrieval can starve one partition entirely; when
    that happens and the store does hold the missing type, one extra
    type-filtered query of size per_type_minimum fills it in.
    """
    cfg = cfg or RetrievalConfig()
    if len(store) == 0:
        raise EmptyKnowledgeBaseError("no knowledge base: the store is empty")
    q_vec = embedder.embed(query)
    ctx = RetrievedContext(query=query)
    for result in store.query(q_vec, k=cfg.k):
        scored = _scored(store, result.chunk_id, result.score, result.rank)
        if scored.chunk.source_type == SourceType.HTML:
            ctx.html_chunks.append(scored)
        else:
            ctx.doc_chunks.append(scored)
    next_rank = len(ctx.doc_chunks) + len(ctx.html_chunks) + 1
    if not ctx.html_chunks and store.has_type(SourceType.HTML):
        for result in store.query(q_vec, k=cfg.per_type_minimum, filter=SourceType.HTML):
            ctx.html_chunks.append(
                _scored(store, result.chunk_id, result.score, next_rank)
            )
            next_rank += 1
    if not ctx.doc_chunks and any(store.has_type(t) for t in DOC_TYPES):
        for result in store.query(q_vec, k=cfg.per_type_minimum, filter=DOC_TYPES):
            ctx.doc_chunks.append(
                _scored(store, result.chunk_id, result.score, next_rank)
            )
            next_rank += 1
    return ctx


def _scored(store: VectorStore, chunk_id: str, score: float, rank: int) -> ScoredChunk:
    stored = store.get(chunk_id)
    assert stored is not None
    return ScoredChunk(chunk=stored.chunk, score=score, rank=rank)


@dataclass(frozen=True)
class PromptBundle:
    system_instructions: str
    documentation_block: str
    html_block: str
    user_query: str
    constraints: tuple[str, ...]
    char_budget: int
    template_version: str = TEMPLATE_VERSION

    def render(self) -> str:
        return _template().format(
            documentation=self.documentation_block,
            html=self.html_block,
            query=self.user_query,
            constraints="\n".join(f"- {c}" for c in self.constraints),
        )


_template_cache: dict[str, str] = {}


def _template() -> str:
    if TEMPLATE_VERSION not in _template_cache:
        path = resources.files("groundctl") / "assets" / f"prompt_{TEMPLATE_VERSION}.txt"
        _template_cache[TEMPLATE_VERSION] = path.read_text(encoding="utf-8")
    return _template_cache[TEMPLATE_VERSION]


def construct_prompt(
    ctx: RetrievedContext, cfg: RetrievalConfig | None = None
) -> PromptBundle:
    """Render the constrained prompt, trimming lowest-ranked chunks to budget.

    HTML chunks are only ever cut at line boundaries so a serialized
    element is never truncated mid-description.
    """
    cfg = cfg or RetrievalConfig()
    if not ctx.query:
        raise ValueError("query must be nonempty")
    template = _template()
    system_instructions = template.split("\n\n", 1)[0]
    bundle = PromptBundle(
        system_instructions=system_instructions,
        documentation_block="",
        html_block="",
        user_query=ctx.query,
        constraints=DEFAULT_CONSTRAINTS,
        char_budget=cfg.char_budget,
    )
    if len(bundle.render()) > cfg.char_budget:
        raise PromptBudgetError(
            f"char_budget {cfg.char_budget} is smaller than the prompt skeleton"
        )
    doc_parts: list[str] = []
    html_parts: list[str] = []
    for scored in ctx.all_chunks():
        is_html = scored.chunk.source_type == SourceType.HTML
        parts = html_parts if is_html else doc_parts
        parts.append(scored.chunk.text)
        candidate = _with_blocks(bundle, doc_parts, html_parts)
        if len(candidate.render()) <= cfg.char_budget:
            bundle = candidate
            continue
        parts.pop()
        if is_html:
            # Retry line by line; whole lines only.
            kept: list[str] = []
            for line in scored.chunk.text.split("\n"):
                kept.append(line)
                candidate = _with_blocks(bundle, doc_parts, html_parts + ["\n".join(kept)])
                if len(candidate.render()) > cfg.char_budget:
                    kept.pop()
                    break
            if kept:
                html_parts.append("\n".join(kept))
                bundle = _with_blocks(bundle, doc_parts, html_parts)
        else:
            room = cfg.char_budget - len(bundle.render())
            if room > 0:
                parts.append(scored.chunk.text[:room])
                candidate = _with_blocks(bundle, doc_parts, html_parts)
                while len(candidate.render()) > cfg.char_budget and parts[-1]:
                    parts[-1] = parts[-1][:-1]
                    candidate = _with_blocks(bundle, doc_parts, html_parts)
                if parts[-1]:
                    bundle = candidate
                else:
                    parts.pop()
        break  # everything lower-ranked is dropped
    return bundle


def _with_blocks(
    bundle: PromptBundle, doc_parts: list[str], html_parts: list[str]
) -> PromptBundle:
    return replace(
        bundle,
        documentation_block="\n\n".join(doc_parts),
        html_block="\n\n".join(html_parts),
    )


@dataclass(frozen=True)
class Intent:
    verb: str
    object: str
    page_hint: str | None


def tokenize(text: str) -> list[str]:
    return _WORD_RE.findall(text.lower())


def extract_quoted(text: str) -> str | None:
    m = _QUOTED_RE.search(text)
    return m.group(1) if m else None


def extract_intent(query: str) -> Intent:
    """Lexicon heuristic: leading verb, remaining object, optional page hint."""
    words = query.strip().split()
    if not words:
        raise ValueError("query must be nonempty")
    verb = words[0].lower().strip(".,!?")
    if verb not in INTENT_VERBS:
        return Intent(verb="generic", object=query.strip(), page_hint=_page_hint("generic", query))
    obj = " ".join(words[1:]).strip()
    return Intent(verb=verb, object=obj, page_hint=_page_hint(verb, query))


def _page_hint(verb: str, query: str) -> str | None:
    """Keyword guess at the page hosting the target; deliberately coarse."""
    tokens = set(tokenize(query))
    if "history" in tokens:
        return "home"
    if tokens & {"checkout", "payment", "email", "shipping", "order"}:
        return "checkout"
    if "cart" in tokens:
        # Adding to cart happens from a product listing, not the cart page.
        return "home" if verb == "add" else "cart"
    if tokens & {"detail", "details", "review", "share"}:
        return "product"
    return None


def build_knowledge_base(
    docs: list[SourceDocument],
    embedder,
    chunk_cfg: ChunkingConfig | None = None,
) -> VectorStore:
    """Ingest, embed, and index a document corpus in one step."""
    corpus = ingest_corpus(docs, chunk_cfg or ChunkingConfig())
    return build_store(corpus.chunks, embedder)
