"""Multi-format document parsing and overlap-aware chunking.

Sources (markdown, plain text, JSON, HTML) are normalized to plain text,
then split by a recursive character splitter that packs separator-aligned
pieces greedily and carries a fixed-size character overlap between
consecutive chunks. Chunk boundaries always land on piece boundaries, so
a line-oriented source (like the structural HTML serialization) is never
split mid-line unless a single line exceeds the chunk size.
"""
from __future__ import annotations

import json
import re
from bisect import bisect_left, bisect_right
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

from .errors import DuplicateSourceError, EncodingError, IngestError


class SourceType(str, Enum):
    MARKDOWN = "markdown"
    TEXT = "text"
    JSON = "json"
    HTML = "html"


EXTENSION_MAP = {
    ".md": SourceType.MARKDOWN,
    ".txt": SourceType.TEXT,
    ".json": SourceType.JSON,
    ".html": SourceType.HTML,
    ".htm": SourceType.HTML,
}

DEFAULT_SEPARATORS = ("\n\n", "\n", " ", "")


@dataclass(frozen=True)
class SourceDocument:
    source_id: str
    source_type: SourceType
    raw_bytes: bytes
    origin: str = ""


@dataclass(frozen=True)
class DocumentChunk:
    chunk_id: str
    source_id: str
    source_type: SourceType
    text: str
    char_range: tuple[int, int]
    ordinal: int


@dataclass(frozen=True)
class ChunkingConfig:
    chunk_size: int = 1000
    overlap: int = 200
    separators: tuple[str, ...] = DEFAULT_SEPARATORS

    def __post_init__(self) -> None:
        if self.chunk_size <= 0:
            raise ValueError("chunk_size must be positive")
        if not 0 <= self.overlap < self.chunk_size:
            raise ValueError("overlap must satisfy 0 <= overlap < chunk_size")


def parse_source(doc: SourceDocument) -> str:
    """Normalize a source document to plain text.

    markdown: markup stripped, heading text and list items preserved.
    json: flattened to one "dot.path: value" line per leaf, document order.
    html: structural serialization from the DOM cleaner.
    text: identity after newline normalization.
    """
    if doc.source_type == SourceType.HTML:
        from .dom import clean_html  # local import: dom depends on nothing here

        return clean_html(doc.raw_bytes).structural_text
    try:
        text = doc.raw_bytes.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise EncodingError(
            f"{doc.source_id}: undecodable byte at offset {exc.start}"
        ) from exc
    text = text.replace("\r\n", "\n").replace("\r", "\n")
    if doc.source_type == SourceType.TEXT:
        return text
    if doc.source_type == SourceType.MARKDOWN:
        return strip_markdown(text)
    if doc.source_type == SourceType.JSON:
        return flatten_json(text, source_id=doc.source_id)
    raise IngestError(f"unsupported source_type: {doc.source_type}")


_MD_HEADING = re.compile(r"^#{1,6}\s+(.*?)\s*#*\s*$")
_MD_LIST_ITEM = re.compile(r"^(\s*)(?:[-*+]|\d+\.)\s+(.*)$")
_MD_BLOCKQUOTE = re.compile(r"^\s*>\s?(.*)$")
_MD_HRULE = re.compile(r"^\s*(?:-{3,}|\*{3,}|_{3,})\s*$")
_MD_IMAGE = re.compile(r"!\[([^\]]*)\]\([^)]*\)")
_MD_LINK = re.compile(r"\[([^\]]+)\]\([^)]*\)")
_MD_EMPHASIS = re.compile(r"(\*\*|__|\*|_|~~)(.+?)\1")
_MD_CODE = re.compile(r"`([^`]*)`")


def strip_markdown(text: str) -> str:
    """Reduce markdown to plain text, one output line per input line."""
    out: list[str] = []
    in_fence = False
    for line in text.split("\n"):
        if line.lstrip().startswith("```"):
            in_fence = not in_fence
            continue
        if in_fence:
            out.append(line)
            continue
        if _MD_HRULE.match(line):
            out.append("")
            continue
        m = _MD_HEADING.match(line)
        if m:
            line = m.group(1)
        m = _MD_LIST_ITEM.match(line)
        if m:
            line = m.group(1) + m.group(2)
        m = _MD_BLOCKQUOTE.match(line)
        if m:
            line = m.group(1)
        line = _MD_IMAGE.sub(r"\1", line)
        line = _MD_LINK.sub(r"\1", line)
        while _MD_EMPHASIS.search(line):
            line = _MD_EMPHASIS.sub(r"\2", line)
        line = _MD_CODE.sub(r"\1", line)
        out.append(line)
    return "\n".join(out)


def flatten_json(text: str, source_id: str = "<json>") -> str:
    """Flatten a JSON document to "path: value" lines in document order."""
    try:
        value = json.loads(text)
    except json.JSONDecodeError as exc:
        raise IngestError(
            f"{source_id}: JSON parse error at byte offset {exc.pos}: {exc.msg}"
        ) from exc
    lines: list[str] = []
    _flatten_value(value, "", lines)
    return "\n".join(lines)


def _flatten_value(value: object, path: str, lines: list[str]) -> None:
    if isinstance(value, dict):
        if not value:
            lines.append(f"{path}: {{}}" if path else "{}")
        for key, sub in value.items():
            _flatten_value(sub, f"{path}.{key}" if path else str(key), lines)
    elif isinstance(value, list):
        if not value:
            lines.append(f"{path}: []" if path else "[]")
        for idx, sub in enumerate(value):
            _flatten_value(sub, f"{path}.{idx}" if path else str(idx), lines)
    else:
        rendered = value if isinstance(value, str) else json.dumps(value)
        lines.append(f"{path}: {rendered}" if path else str(rendered))


def chunk_text(
    text: str, cfg: ChunkingConfig | None = None, source_id: str = "doc",
    source_type: SourceType = SourceType.TEXT,
) -> list[DocumentChunk]:
    """Split text into overlapping chunks with explicit [start, end) offsets.

    Greedy packing over separator-aligned pieces: each chunk extends to the
    furthest piece boundary within chunk_size; the next chunk starts at the
    first piece boundary at or past (end - overlap). On separator-free text
    the overlap is exactly cfg.overlap characters.
    """
    cfg = cfg or ChunkingConfig()
    if not text:
        return []
    ends = _piece_ends(text, 0, list(cfg.separators), cfg.chunk_size)
    chunks: list[DocumentChunk] = []
    start = 0
    n = len(text)
    while start < n:
        j = bisect_right(ends, start + cfg.chunk_size) - 1
        if j < 0 or ends[j] <= start:
            raise AssertionError("piece exceeds chunk_size")  # pieces are bounded
        end = ends[j]
        ordinal = len(chunks)
        chunks.append(
            DocumentChunk(
                chunk_id=f"{source_id}:{ordinal:04d}",
                source_id=source_id,
                source_type=source_type,
                text=text[start:end],
                char_range=(start, end),
                ordinal=ordinal,
            )
        )
        if end >= n:
            break
        start = ends[bisect_left(ends, max(end - cfg.overlap, start + 1))]
    return chunks


def _piece_ends(
    text: str, offset: int, separators: list[str], chunk_size: int
) -> list[int]:
    """End offsets of atomic pieces, each at most chunk_size characters.

    Splits on the first separator; pieces still too large recurse into the
    remaining separators. The empty-string separator splits per character,
    so the recursion always terminates with bounded pieces.
    """
    if len(text) <= chunk_size:
        return [offset + len(text)]
    sep = separators[0] if separators else ""
    rest = separators[1:]
    if sep == "":
        return [offset + i + 1 for i in range(len(text))]
    ends: list[int] = []
    for piece_start, piece_end in _split_spans(text, sep):
        if piece_end - piece_start <= chunk_size:
            ends.append(offset + piece_end)
        else:
            ends.extend(
                _piece_ends(
                    text[piece_start:piece_end], offset + piece_start, rest, chunk_size
                )
            )
    return ends


def _split_spans(text: str, sep: str) -> list[tuple[int, int]]:
    """Contiguous piece spans with each separator attached to its piece."""
    spans: list[tuple[int, int]] = []
    start = 0
    idx = text.find(sep)
    while idx != -1:
        spans.append((start, idx + len(sep)))
        start = idx + len(sep)
        idx = text.find(sep, start)
    if start < len(text):
        spans.append((start, len(text)))
    return spans


@dataclass
class Corpus:
    """Chunks from a batch ingest, with per-source normalized text."""

    chunks: list[DocumentChunk] = field(default_factory=list)
    normalized: dict[str, str] = field(default_factory=dict)


def ingest_corpus(
    docs: list[SourceDocument], cfg: ChunkingConfig | None = None
) -> Corpus:
    """Parse and chunk a batch of documents.

    Every source with nonempty normalized text contributes at least one
    chunk; chunks carry the source_type needed for type-filtered retrieval.
    """
    cfg = cfg or ChunkingConfig()
    seen: set[str] = set()
    corpus = Corpus()
    for doc in docs:
        if doc.source_id in seen:
            raise DuplicateSourceError(doc.source_id)
        seen.add(doc.source_id)
        text = parse_source(doc)
        corpus.normalized[doc.source_id] = text
        corpus.chunks.extend(
            chunk_text(text, cfg, source_id=doc.source_id, source_type=doc.source_type)
        )
    return corpus


def document_from_path(path: Path, source_id: str | None = None) -> SourceDocument:
    """Build a SourceDocument from a file, mapping type from the extension."""
    ext = path.suffix.lower()
    if ext not in EXTENSION_MAP:
        raise IngestError(f"unsupported extension: {path.name}")
    return SourceDocument(
        source_id=source_id if source_id is not None else path.stem,
        source_type=EXTENSION_MAP[ext],
        raw_bytes=path.read_bytes(),
        origin=str(path),
    )


def load_directory(directory: Path) -> list[SourceDocument]:
    """Load every supported file in a directory, sorted by name.

    Fixture manifests (JSON with format "groundctl-fixture") describe the
    execution harness rather than the application, so they are skipped.
    """
    docs = []
    for path in sorted(directory.iterdir()):
        if not path.is_file() or path.suffix.lower() not in EXTENSION_MAP:
            continue
        if path.suffix.lower() == ".json" and _is_fixture_manifest(path):
            continue
        docs.append(document_from_path(path))
    return docs


def _is_fixture_manifest(path: Path) -> bool:
    try:
        head = json.loads(path.read_text(encoding="utf-8"))
    except (json.JSONDecodeError, UnicodeDecodeError):
        return False
    return isinstance(head, dict) and head.get("format") == "groundctl-fixture"
