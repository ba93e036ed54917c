"""Staged analysis orchestration: source recommendation, theme
generation, quote extraction, subtopic identification, and quote mapping,
with token-aware batching, per-stage persistence, and job tracking.

Stages are strictly sequential; batches inside a stage may run
concurrently up to the gateway's in-flight limit, but results are always
assembled in input order so a fixed fixture set yields byte-identical
artifacts run after run.
"""

from __future__ import annotations

import re
import threading
import uuid
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence, Tuple

from .batching import estimate_tokens, pack_by_budget
from .cache import CacheKey, CacheStore, theme_digest
from .errors import (
    EmptyCatalog,
    EmptyInput,
    MalformedOutput,
    PulseError,
    SchemaViolation,
    WrongCardinality,
)
from .gateway import Gateway, PromptRequest
from .ingest import Corpus, DiscussionThread
from .jsonio import write_canonical
from .prompts import PromptLibrary, derive_binding_from_theme

THEME_COUNT = 9
UNCATEGORIZED_CODE = 0
UNCATEGORIZED_NAME = "Uncategorized"

# timestamp used in replay mode so recorded pipelines are byte-stable
REPLAY_EPOCH = "1970-01-01T00:00:00+00:00"

STAGES = ("themes", "quotes", "subtopics", "mapping")

PHASES = ("queued", "extracting", "coding", "mapping", "done", "failed")
_PHASE_INDEX = {name: i for i, name in enumerate(PHASES)}


@dataclass(frozen=True)
class Theme:
    title: str
    description: str = ""
    origin: str = "suggested"


@dataclass(frozen=True)
class QuoteEntry:
    quote: str
    summary: str
    source_id: str
    traceable: bool = True


@dataclass(frozen=True)
class Subtopic:
    code: int
    name: str
    description: str


@dataclass(frozen=True)
class CategorizedQuote:
    quote: str
    source_id: str
    code: int
    code_name: str


@dataclass
class JobState:
    job_id: str
    dataset_id: str
    theme: Theme
    phase: str = "queued"
    processed_chunks: int = 0
    total_chunks: int = 0
    error: Optional[str] = None
    report_id: Optional[str] = None
    warnings: List[str] = field(default_factory=list)
    _lock: threading.Lock = field(
        default_factory=threading.Lock, repr=False, compare=False
    )

    def advance(self, phase: str) -> None:
        with self._lock:
            if _PHASE_INDEX[phase] <= _PHASE_INDEX[self.phase]:
                raise ValueError(f"illegal phase transition {self.phase} -> {phase}")
            if self.phase in ("done", "failed"):
                raise ValueError(f"job already terminal in phase {self.phase}")
            self.phase = phase

    def fail(self, message: str) -> None:
        with self._lock:
            if self.phase == "done":
                raise ValueError("cannot fail a completed job")
            self.phase = "failed"
            self.error = message

    def add_chunks(self, count: int) -> None:
        with self._lock:
            self.total_chunks += count

    def tick(self) -> None:
        with self._lock:
            self.processed_chunks += 1

    def snapshot(self) -> dict:
        with self._lock:
            return {
                "job_id": self.job_id,
                "dataset_id": self.dataset_id,
                "theme": asdict(self.theme),
                "phase": self.phase,
                "processed_chunks": self.processed_chunks,
                "total_chunks": self.total_chunks,
                "error": self.error,
                "report_id": self.report_id,
                "warnings": list(self.warnings),
            }


# --- expected response structure per stage ---

THEMES_SCHEMA = {
    "type": "object",
    "required": ["themes"],
    "properties": {
        "themes": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["title"],
                "properties": {
                    "title": {"type": "string"},
                    "description": {"type": "string"},
                },
            },
        }
    },
}

ENTRIES_SCHEMA = {
    "type": "object",
    "required": ["entries"],
    "properties": {
        "entries": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["quote", "summary"],
                "properties": {
                    "quote": {"type": "string"},
                    "summary": {"type": "string"},
                },
            },
        }
    },
}

CODES_SCHEMA = {
    "type": "object",
    "required": ["codes"],
    "properties": {
        "codes": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["name", "description"],
                "properties": {
                    "name": {"type": "string"},
                    "description": {"type": "string"},
                },
            },
        }
    },
}

MAPPING_SCHEMA = {
    "type": "object",
    "required": ["categorized_quotes"],
    "properties": {
        "categorized_quotes": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["quote", "codes"],
                "properties": {
                    "quote": {"type": "string"},
                    "source_id": {"type": "string"},
                    "codes": {
                        "type": "array",
                        "items": {
                            "type": "object",
                            "required": ["code"],
                            "properties": {
                                "code": {"type": "integer"},
                                "code_name": {"type": "string"},
                            },
                        },
                    },
                },
            },
        }
    },
}


def normalize_ws(text: str) -> str:
    """Collapse whitespace runs and trim; the equality used for quote
    traceability and quote matching."""
    return " ".join(text.split())


def format_thread_rows(threads: Sequence[DiscussionThread]) -> str:
    parts = ["Data rows:"]
    for t in threads:
        parts.append(f"--- ROW thread_id={t.thread_id} ---\n{t.text}")
    return "\n\n".join(parts)


def format_summary_rows(summaries: Sequence[str]) -> str:
    lines = ["Summaries:"]
    for i, summary in enumerate(summaries, 1):
        lines.append(f"{i}. {normalize_ws(summary)}")
    return "\n".join(lines)


def format_code_list(subtopics: Sequence[Subtopic]) -> str:
    lines = ["Codes:"]
    for s in subtopics:
        lines.append(f"{s.code}. {normalize_ws(s.name)}: {normalize_ws(s.description)}")
    return "\n".join(lines)


def format_quote_rows(quotes: Sequence[QuoteEntry]) -> str:
    parts = ["Quotes:"]
    for q in quotes:
        parts.append(f"--- QUOTE source_id={q.source_id} ---\n{q.quote}")
    return "\n\n".join(parts)


def _utc_now() -> str:
    return datetime.now(timezone.utc).replace(microsecond=0).isoformat()


class Pipeline:
    def __init__(
        self,
        gateway: Gateway,
        cache: CacheStore,
        reports_root: Path,
        library: Optional[PromptLibrary] = None,
        *,
        model_id: str = "gpt-4",
        batch_token_budget: int = 6000,
        catalog_chunk_size: int = 200,
        code_count: int = 9,
        max_output_tokens: int = 4096,
        clock: Optional[Callable[[], str]] = None,
    ):
        self.gateway = gateway
        self.cache = cache
        self.reports_root = Path(reports_root)
        self.library = library or PromptLibrary()
        self.model_id = model_id
        self.batch_token_budget = batch_token_budget
        self.catalog_chunk_size = catalog_chunk_size
        self.code_count = code_count
        self.max_output_tokens = max_output_tokens
        if clock is None:
            clock = (lambda: REPLAY_EPOCH) if gateway.config.mode == "replay" else _utc_now
        self.clock = clock

    @property
    def prompt_version(self) -> str:
        return self.library.version

    def _request(self, user_text: str, tag: str) -> PromptRequest:
        return PromptRequest(
            model_id=self.model_id,
            user_text=user_text,
            temperature=0.0,
            max_output_tokens=self.max_output_tokens,
            request_tag=tag,
        )

    def _artifact(self, stage: str, payload: dict) -> dict:
        return {
            "stage": stage,
            "payload": payload,
            "produced_at": self.clock(),
            "prompt_version": self.prompt_version,
            "model_id": self.model_id,
        }

    def _run_ordered(self, fns: Sequence[Callable[[], object]]) -> list:
        """Run batch thunks, possibly concurrently, returning results in
        submission order regardless of completion order."""
        if len(fns) <= 1:
            return [fn() for fn in fns]
        workers = min(self.gateway.in_flight_limit, len(fns))
        with ThreadPoolExecutor(max_workers=workers) as executor:
            futures = [executor.submit(fn) for fn in fns]
            return [f.result() for f in futures]

    # --- source recommendation ---

    def recommend_sources(self, topic: str, catalog: Sequence[str]) -> List[str]:
        """Rank catalog labels by relevance to the topic.

        The catalog is chunked, one completion per chunk; returned names
        are parsed from comma-separated text, deduplicated, and filtered
        (case-insensitively) to labels actually present in the catalog.
        """
        if not catalog:
            raise EmptyCatalog("cannot recommend from an empty source catalog")
        chunks = [
            list(catalog[i : i + self.catalog_chunk_size])
            for i in range(0, len(catalog), self.catalog_chunk_size)
        ]

        def call(chunk: List[str]) -> str:
            rendered = self.library.render(
                "source_recommendation",
                {"subreddits_chunk": ", ".join(chunk), "topic": topic},
            )
            return self.gateway.complete(self._request(rendered, "recommend")).text

        replies = self._run_ordered([lambda c=chunk: call(c) for chunk in chunks])

        canonical = {label.casefold(): label for label in catalog}
        seen = set()
        ranked: List[str] = []
        for reply in replies:
            for name in re.split(r"[,\n]", reply):
                key = name.strip().strip(".").casefold()
                if key and key in canonical and key not in seen:
                    seen.add(key)
                    ranked.append(canonical[key])
        return ranked

    # --- theme generation ---

    def _themes_cache_key(self, dataset_id: str) -> CacheKey:
        return CacheKey(
            dataset_id=dataset_id,
            stage="themes",
            theme_digest=theme_digest(""),
            prompt_version=self.prompt_version,
            model_id=self.model_id,
        )

    def generate_themes(self, corpus: Corpus) -> List[Theme]:
        """Produce exactly nine suggested themes for a corpus, cached per
        (dataset, prompt version, model)."""
        key = self._themes_cache_key(corpus.dataset_id)
        cached = self.cache.get(key)
        if cached is not None:
            return [Theme(**t) for t in cached["payload"]["themes"]]

        rendered = self.library.render(
            "theme_generation", {"subreddit": corpus.source_label}
        )
        themes = self._parse_themes(
            self.gateway.complete_json(self._request(rendered, "themes"), THEMES_SCHEMA)
        )
        if len(themes) != THEME_COUNT:
            corrected = f"{rendered}\n\nReturn exactly {THEME_COUNT} themes."
            themes = self._parse_themes(
                self.gateway.complete_json(
                    self._request(corrected, "themes"), THEMES_SCHEMA
                )
            )
            if len(themes) != THEME_COUNT:
                raise WrongCardinality(
                    f"theme generation returned {len(themes)} themes, expected {THEME_COUNT}"
                )
        self.cache.put(key, self._artifact("themes", {"themes": [asdict(t) for t in themes]}))
        return themes

    @staticmethod
    def _parse_themes(value: Optional[dict]) -> List[Theme]:
        if value is None:
            return []
        return [
            Theme(
                title=item["title"],
                description=item.get("description", ""),
                origin="suggested",
            )
            for item in value["themes"]
            if item.get("title")
        ]

    # --- quote extraction ---

    def extract_quotes(
        self,
        corpus: Corpus,
        theme: Theme,
        warnings: Optional[List[str]] = None,
        progress: Optional[Callable[[], None]] = None,
        on_batches: Optional[Callable[[int], None]] = None,
    ) -> List[QuoteEntry]:
        """Extract quote entries for a theme across token-bounded batches
        of whole threads. A batch that stays malformed after retries is
        skipped with a warning; it never aborts the job."""
        warnings = warnings if warnings is not None else []
        rendered = self.library.render(
            "quote_extraction", derive_binding_from_theme(theme, corpus.source_label)
        )
        batches = pack_by_budget(
            corpus.threads, self.batch_token_budget, lambda t: estimate_tokens(t.text)
        )
        if on_batches:
            on_batches(len(batches))

        def run(index: int, batch: List[DiscussionThread]):
            result = self._extract_batch(rendered, index, batch)
            if progress:
                progress()
            return result

        results = self._run_ordered(
            [lambda i=i, b=batch: run(i, b) for i, batch in enumerate(batches)]
        )
        entries: List[QuoteEntry] = []
        for batch_entries, batch_warnings in results:
            entries.extend(batch_entries)
            warnings.extend(batch_warnings)
        return entries

    def _extract_batch(
        self, rendered: str, index: int, batch: List[DiscussionThread]
    ) -> Tuple[List[QuoteEntry], List[str]]:
        warnings: List[str] = []
        user_text = f"{rendered}\n\n{format_thread_rows(batch)}"
        try:
            value = self.gateway.complete_json(
                self._request(user_text, "quotes"), ENTRIES_SCHEMA
            )
        except (MalformedOutput, SchemaViolation) as exc:
            return [], [f"quotes batch {index}: skipped after retries: {exc}"]
        if value is None:
            return [], []

        entries: List[QuoteEntry] = []
        for item in value["entries"]:
            quote = item["quote"]
            summary = item["summary"]
            if not quote.strip():
                warnings.append(f"quotes batch {index}: dropped entry with empty quote")
                continue
            source_id, traceable = self._resolve_source(batch, quote)
            if len(summary.split()) > 8:
                warnings.append(
                    f"quotes batch {index}: summary exceeds 8 words: {summary!r}"
                )
            entries.append(
                QuoteEntry(
                    quote=quote, summary=summary, source_id=source_id, traceable=traceable
                )
            )
        return entries, warnings

    @staticmethod
    def _resolve_source(
        batch: List[DiscussionThread], quote: str
    ) -> Tuple[str, bool]:
        needle = normalize_ws(quote)
        if len(batch) == 1:
            return batch[0].thread_id, needle in normalize_ws(batch[0].text)
        for thread in batch:
            if needle in normalize_ws(thread.text):
                return thread.thread_id, True
        return "", False

    # --- subtopic identification ---

    def identify_subtopics(
        self,
        quotes: List[QuoteEntry],
        source_label: str,
        warnings: Optional[List[str]] = None,
        progress: Optional[Callable[[], None]] = None,
        on_batches: Optional[Callable[[int], None]] = None,
    ) -> List[Subtopic]:
        """Code the aggregated quote summaries into exactly code_count
        subtopics. Oversized aggregates go through a map-reduce round:
        per-group coding, then one consolidation call over group codes."""
        if not quotes:
            raise EmptyInput("subtopic identification needs at least one quote")
        warnings = warnings if warnings is not None else []
        summaries = [q.summary for q in quotes]
        groups = pack_by_budget(summaries, self.batch_token_budget, estimate_tokens)
        if on_batches:
            on_batches(len(groups) + (1 if len(groups) > 1 else 0))

        def run(group: List[str]):
            result = self._code_summaries(source_label, group)
            if progress:
                progress()
            return result

        if len(groups) == 1:
            codes = run(groups[0])
        else:
            per_group = self._run_ordered([lambda g=g: run(g) for g in groups])
            merged = [
                f"{code['name']}: {code['description']}"
                for group_codes in per_group
                for code in group_codes
            ]
            codes = run(merged)
        return [
            Subtopic(code=i, name=c["name"], description=c["description"])
            for i, c in enumerate(codes, 1)
        ]

    def _code_summaries(self, source_label: str, summaries: List[str]) -> List[dict]:
        rendered = self.library.render("subtopic_analysis", {"subreddit": source_label})
        user_text = f"{rendered}\n\n{format_summary_rows(summaries)}"
        codes = self._parse_codes(
            self.gateway.complete_json(self._request(user_text, "subtopics"), CODES_SCHEMA)
        )
        if not self._codes_valid(codes):
            corrected = (
                f"{user_text}\n\nReturn exactly {self.code_count} codes, "
                "each with a distinct, non-empty name."
            )
            codes = self._parse_codes(
                self.gateway.complete_json(
                    self._request(corrected, "subtopics"), CODES_SCHEMA
                )
            )
            if not self._codes_valid(codes):
                raise WrongCardinality(
                    f"subtopic identification returned {len(codes)} codes "
                    f"({len({c['name'].casefold() for c in codes})} distinct names), "
                    f"expected {self.code_count}"
                )
        return codes

    @staticmethod
    def _parse_codes(value: Optional[dict]) -> List[dict]:
        if value is None:
            return []
        return [c for c in value["codes"] if c.get("name", "").strip()]

    def _codes_valid(self, codes: List[dict]) -> bool:
        names = {c["name"].casefold() for c in codes}
        return len(codes) == self.code_count and len(names) == self.code_count

    # --- quote mapping ---

    def map_quotes(
        self,
        quotes: List[QuoteEntry],
        subtopics: List[Subtopic],
        source_label: str,
        warnings: Optional[List[str]] = None,
        progress: Optional[Callable[[], None]] = None,
        on_batches: Optional[Callable[[int], None]] = None,
    ) -> List[CategorizedQuote]:
        """Assign every quote exactly one code. Quotes the model omits or
        miscodes get one retry in a smaller batch, then fall back to the
        reserved Uncategorized code 0."""
        if not quotes:
            return []
        warnings = warnings if warnings is not None else []
        canonical = {s.code: s.name for s in subtopics}
        rendered = self.library.render(
            "quote_mapping",
            {"subreddit": source_label, "code_count": str(self.code_count)},
        )
        code_list = format_code_list(subtopics)

        indexed = list(enumerate(quotes))
        batches = pack_by_budget(
            indexed, self.batch_token_budget, lambda iq: estimate_tokens(iq[1].quote)
        )
        if on_batches:
            on_batches(len(batches))

        def run(batch: List[Tuple[int, QuoteEntry]]):
            result = self._map_batch(rendered, code_list, canonical, batch)
            if progress:
                progress()
            return result

        resolved: Dict[int, Tuple[int, str]] = {}
        for partial, batch_warnings in self._run_ordered(
            [lambda b=b: run(b) for b in batches]
        ):
            resolved.update(partial)
            warnings.extend(batch_warnings)

        leftovers = [(i, q) for i, q in indexed if i not in resolved]
        if leftovers:
            retry_batches = pack_by_budget(
                leftovers, self.batch_token_budget, lambda iq: estimate_tokens(iq[1].quote)
            )
            if on_batches:
                on_batches(len(retry_batches))
            for partial, batch_warnings in self._run_ordered(
                [lambda b=b: run(b) for b in retry_batches]
            ):
                resolved.update(partial)
                warnings.extend(batch_warnings)

        categorized: List[CategorizedQuote] = []
        for i, quote in indexed:
            if i in resolved:
                code, name = resolved[i]
                categorized.append(
                    CategorizedQuote(
                        quote=quote.quote, source_id=quote.source_id, code=code, code_name=name
                    )
                )
            else:
                warnings.append(
                    f"mapping: quote from {quote.source_id or 'unknown source'} "
                    f"was not coded after retry; assigned {UNCATEGORIZED_NAME}"
                )
                categorized.append(
                    CategorizedQuote(
                        quote=quote.quote,
                        source_id=quote.source_id,
                        code=UNCATEGORIZED_CODE,
                        code_name=UNCATEGORIZED_NAME,
                    )
                )
        return categorized

    def _map_batch(
        self,
        rendered: str,
        code_list: str,
        canonical: Dict[int, str],
        batch: List[Tuple[int, QuoteEntry]],
    ) -> Tuple[Dict[int, Tuple[int, str]], List[str]]:
        user_text = f"{rendered}\n\n{code_list}\n\n{format_quote_rows([q for _, q in batch])}"
        try:
            value = self.gateway.complete_json(
                self._request(user_text, "mapping"), MAPPING_SCHEMA
            )
        except (MalformedOutput, SchemaViolation) as exc:
            return {}, [f"mapping batch: unparseable response, will retry: {exc}"]
        if value is None:
            return {}, []

        # index pending inputs by normalized quote (+ source) for matching
        by_quote_source: Dict[Tuple[str, str], List[int]] = {}
        by_quote: Dict[str, List[int]] = {}
        for i, q in batch:
            nq = normalize_ws(q.quote)
            by_quote_source.setdefault((nq, q.source_id), []).append(i)
            by_quote.setdefault(nq, []).append(i)

        resolved: Dict[int, Tuple[int, str]] = {}
        for item in value["categorized_quotes"]:
            codes = item.get("codes") or []
            if not codes:
                continue
            code = codes[0].get("code")
            if not isinstance(code, int) or not 1 <= code <= self.code_count:
                continue  # miscoded: leave unresolved for the retry round
            nq = normalize_ws(item.get("quote", ""))
            sid = item.get("source_id", "")
            candidates = by_quote_source.get((nq, sid)) or by_quote.get(nq) or []
            index = next((i for i in candidates if i not in resolved), None)
            if index is None:
                continue
            # the model's code_name is advisory; the canonical subtopic name wins
            resolved[index] = (code, canonical[code])
        return resolved, []

    # --- full job ---

    def report_id_for(self, dataset_id: str, theme: Theme) -> str:
        import hashlib

        raw = "|".join(
            (dataset_id, theme_digest(theme.title), self.prompt_version, self.model_id)
        )
        return "r" + hashlib.sha256(raw.encode("utf-8")).hexdigest()[:12]

    def _report_cache_key(self, dataset_id: str, theme: Theme) -> CacheKey:
        return CacheKey(
            dataset_id=dataset_id,
            stage="report",
            theme_digest=theme_digest(theme.title),
            prompt_version=self.prompt_version,
            model_id=self.model_id,
        )

    def cached_report_id(self, dataset_id: str, theme: Theme) -> Optional[str]:
        cached = self.cache.get(self._report_cache_key(dataset_id, theme))
        if cached is None:
            return None
        return cached["payload"]["report_id"]

    def report_dir(self, report_id: str) -> Path:
        return self.reports_root / report_id

    def _persist_stage(self, report_id: str, stage: str, payload: dict) -> None:
        write_canonical(
            self.report_dir(report_id) / f"{stage}.json", self._artifact(stage, payload)
        )

    def run_report_job(
        self, corpus: Corpus, theme: Theme, job: Optional[JobState] = None
    ) -> JobState:
        """Execute extract -> code -> map for one (corpus, theme) pair,
        persisting a stage artifact after each stage and the assembled
        report (JSON, JSONL, Markdown) at the end. A completed pair is
        cached, so identical re-requests finish instantly with zero
        completion calls."""
        from .report import build_report, export_jsonl, export_markdown, verify_traceability

        if job is None:
            job = JobState(
                job_id=f"job-{uuid.uuid4().hex[:12]}",
                dataset_id=corpus.dataset_id,
                theme=theme,
            )

        cached = self.cached_report_id(corpus.dataset_id, theme)
        if cached is not None:
            job.report_id = cached
            job.advance("done")
            return job

        report_id = self.report_id_for(corpus.dataset_id, theme)
        try:
            job.advance("extracting")
            entries = self.extract_quotes(
                corpus,
                theme,
                warnings=job.warnings,
                progress=job.tick,
                on_batches=job.add_chunks,
            )
            self._persist_stage(
                report_id, "quotes", {"entries": [asdict(e) for e in entries]}
            )

            job.advance("coding")
            subtopics = self.identify_subtopics(
                entries,
                corpus.source_label,
                warnings=job.warnings,
                progress=job.tick,
                on_batches=job.add_chunks,
            )
            self._persist_stage(
                report_id, "subtopics", {"codes": [asdict(s) for s in subtopics]}
            )

            job.advance("mapping")
            categorized = self.map_quotes(
                entries,
                subtopics,
                corpus.source_label,
                warnings=job.warnings,
                progress=job.tick,
                on_batches=job.add_chunks,
            )
            self._persist_stage(
                report_id,
                "mapping",
                {"categorized_quotes": [asdict(c) for c in categorized]},
            )
            write_canonical(
                self.report_dir(report_id) / "themes.json",
                self._artifact("themes", {"themes": [asdict(theme)]}),
            )

            report = build_report(
                entries,
                subtopics,
                categorized,
                report_id=report_id,
                dataset_id=corpus.dataset_id,
                source_label=corpus.source_label,
                theme=theme,
                code_count=self.code_count,
                prompt_version=self.prompt_version,
                model_id=self.model_id,
                created_at=self.clock(),
                warnings=list(job.warnings),
            )
            report, _ = verify_traceability(report, corpus)
            report_dir = self.report_dir(report_id)
            write_canonical(report_dir / "report.json", report.to_dict())
            export_jsonl(report, report_dir / "report.jsonl")
            export_markdown(report, report_dir / "report.md")

            self.cache.put(
                self._report_cache_key(corpus.dataset_id, theme),
                self._artifact("report", {"report_id": report_id}),
            )
            job.report_id = report_id
            job.advance("done")
        except PulseError as exc:
            job.fail(f"{job.phase} stage: {exc}")
        except Exception as exc:  # noqa: BLE001 - job must reach a terminal state
            job.fail(f"{job.phase} stage: internal error: {exc}")
            raise
        return job


class JobRegistry:
    """Tracks jobs; one live job per (dataset, theme, prompts, model)."""

    def __init__(self):
        self._lock = threading.Lock()
        self._jobs: Dict[str, JobState] = {}
        self._active: Dict[tuple, str] = {}

    @staticmethod
    def _key(pipeline: Pipeline, dataset_id: str, theme: Theme) -> tuple:
        return (
            dataset_id,
            theme_digest(theme.title),
            pipeline.prompt_version,
            pipeline.model_id,
        )

    def get(self, job_id: str) -> Optional[JobState]:
        with self._lock:
            return self._jobs.get(job_id)

    def running_job(
        self, pipeline: Pipeline, dataset_id: str, theme: Theme
    ) -> Optional[JobState]:
        with self._lock:
            job_id = self._active.get(self._key(pipeline, dataset_id, theme))
            job = self._jobs.get(job_id) if job_id else None
        if job and job.phase not in ("done", "failed"):
            return job
        return None

    def submit(self, pipeline: Pipeline, corpus: Corpus, theme: Theme) -> JobState:
        """Start a background job, or return the already-running one for
        the same (dataset, theme) so duplicate submissions attach to it."""
        with self._lock:
            key = self._key(pipeline, corpus.dataset_id, theme)
            existing_id = self._active.get(key)
            if existing_id:
                existing = self._jobs[existing_id]
                if existing.phase not in ("done", "failed"):
                    return existing
            job = JobState(
                job_id=f"job-{uuid.uuid4().hex[:12]}",
                dataset_id=corpus.dataset_id,
                theme=theme,
            )
            self._jobs[job.job_id] = job
            self._active[key] = job.job_id
        worker = threading.Thread(
            target=pipeline.run_report_job, args=(corpus, theme, job), daemon=True
        )
        worker.start()
        return job

    def record_completed(
        self, pipeline: Pipeline, dataset_id: str, theme: Theme, report_id: str
    ) -> JobState:
        """Register a synthetic done job for a warm-cache submission."""
        job = JobState(
            job_id=f"job-{uuid.uuid4().hex[:12]}", dataset_id=dataset_id, theme=theme
        )
        job.report_id = report_id
        job.advance("done")
        with self._lock:
            self._jobs[job.job_id] = job
            self._active[self._key(pipeline, dataset_id, theme)] = job.job_id
        return job
