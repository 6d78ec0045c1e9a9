"""Exception types shared across the pipeline."""
from __future__ import annotations


class GroundctlError(Exception):
    """Base class for all package-specific errors."""


class IngestError(GroundctlError):
    """Source document could not be parsed or ingested."""


class EncodingError(IngestError):
    """Raw bytes could not be decoded with the required codec."""


class DuplicateSourceError(IngestError):
    """Two documents in one corpus share a source_id."""

    def __init__(self, source_id: str) -> None:
        super().__init__(f"duplicate source_id: {source_id!r}")
        self.source_id = source_id


class SelectorError(GroundctlError):
    """A CSS selector is outside the supported grammar.

    Distinct from a selector that parses but matches nothing: this error
    signals an invalid selector, not a hallucinated element.
    """


class UnknownPageError(GroundctlError):
    """A page_id is not present in the DOM index."""


class StoreError(GroundctlError):
    """Vector store operation failed."""


class StoreLoadError(StoreError):
    """Persisted store file is unreadable; carries the offending line."""

    def __init__(self, message: str, line_no: int) -> None:
        super().__init__(f"line {line_no}: {message}")
        self.line_no = line_no


class DimensionMismatchError(StoreError):
    """Vector dimensions disagree."""


class EmptyKnowledgeBaseError(GroundctlError):
    """Retrieval requested against an empty store."""


class PromptBudgetError(GroundctlError):
    """char_budget is too small to hold even the prompt skeleton."""


class ProviderError(GroundctlError):
    """A remote provider (embedding or LLM) call failed."""

    def __init__(self, message: str, *, retryable: bool = False) -> None:
        super().__init__(message)
        self.retryable = retryable


class GroundingError(GroundctlError):
    """A grounded generator was invoked without grounding context."""


class ScriptSyntaxError(GroundctlError):
    """Generated script text violates the action DSL grammar."""

    def __init__(self, message: str, line_no: int) -> None:
        super().__init__(f"line {line_no}: {message}")
        self.line_no = line_no
        self.reason = message


class ManifestError(GroundctlError):
    """Fixture manifest is malformed or references unknown pages/elements."""


class ConfigurationError(GroundctlError):
    """Execution environment is misconfigured (not a test failure)."""
