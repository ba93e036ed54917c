"""pulse: synthesize forum-archive discussions into structured
policy-research reports via a staged LLM pipeline."""

__version__ = "0.1.0"

from .cache import CacheKey, CacheStore, theme_digest
from .gateway import (
    Gateway,
    LlmResponse,
    PriceTable,
    PromptRequest,
    ProviderConfig,
    estimate_cost,
    request_hash,
)
from .ingest import (
    Corpus,
    DiscussionThread,
    RawComment,
    RawPost,
    aggregate_threads,
    ingest_archive,
    load_corpus,
    parse_archive,
    write_corpus_csv,
)
from .pipeline import (
    CategorizedQuote,
    JobRegistry,
    JobState,
    Pipeline,
    QuoteEntry,
    Subtopic,
    Theme,
)
from .prompts import PromptLibrary, derive_binding_from_theme
from .report import (
    Report,
    build_report,
    export_jsonl,
    export_markdown,
    load_report_jsonl,
    verify_traceability,
)

__all__ = [
    "CacheKey",
    "CacheStore",
    "CategorizedQuote",
    "Corpus",
    "DiscussionThread",
    "Gateway",
    "JobRegistry",
    "JobState",
    "LlmResponse",
    "Pipeline",
    "PriceTable",
    "PromptLibrary",
    "PromptRequest",
    "ProviderConfig",
    "QuoteEntry",
    "RawComment",
    "RawPost",
    "Report",
    "Subtopic",
    "Theme",
    "aggregate_threads",
    "build_report",
    "derive_binding_from_theme",
    "estimate_cost",
    "export_jsonl",
    "export_markdown",
    "ingest_archive",
    "load_corpus",
    "load_report_jsonl",
    "parse_archive",
    "request_hash",
    "theme_digest",
    "verify_traceability",
    "write_corpus_csv",
]
