"""Assemble mapping output into the final report, verify quote
traceability against the source corpus, and export JSONL / Markdown.

A quote is traceable iff its whitespace-normalized text appears as a
contiguous substring of the whitespace-normalized text of its source
thread: tolerant of formatting drift, unforgiving of paraphrase.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional, Tuple

from .errors import InconsistentInputs, MissingThread
from .ingest import Corpus
from .jsonio import dumps_compact
from .pipeline import (
    CategorizedQuote,
    QuoteEntry,
    Subtopic,
    Theme,
    UNCATEGORIZED_CODE,
    UNCATEGORIZED_NAME,
    normalize_ws,
)

JSONL_SCHEMA_VERSION = 1

UNCATEGORIZED_DESCRIPTION = (
    "Quotes that could not be confidently assigned to any code."
)


@dataclass(frozen=True)
class ReportEntry:
    summary: str
    quote: str
    source_id: str
    traceable: bool


@dataclass(frozen=True)
class SubtopicSection:
    subtopic: Subtopic
    quote_count: int
    entries: Tuple[ReportEntry, ...]


@dataclass(frozen=True)
class Totals:
    quotes: int
    traceable: int
    untraceable: int


@dataclass(frozen=True)
class Provenance:
    prompt_version: str
    model_id: str
    created_at: str
    warnings: Tuple[str, ...] = ()


@dataclass
class Report:
    report_id: str
    dataset_id: str
    source_label: str
    theme: Theme
    code_count: int
    sections: List[SubtopicSection]
    totals: Totals
    provenance: Provenance

    def to_dict(self) -> dict:
        return {
            "report_id": self.report_id,
            "dataset_id": self.dataset_id,
            "source_label": self.source_label,
            "theme": {
                "title": self.theme.title,
                "description": self.theme.description,
                "origin": self.theme.origin,
            },
            "code_count": self.code_count,
            "totals": {
                "quotes": self.totals.quotes,
                "traceable": self.totals.traceable,
                "untraceable": self.totals.untraceable,
            },
            "provenance": {
                "prompt_version": self.provenance.prompt_version,
                "model_id": self.provenance.model_id,
                "created_at": self.provenance.created_at,
                "warnings": list(self.provenance.warnings),
            },
            "sections": [
                {
                    "subtopic": {
                        "code": s.subtopic.code,
                        "name": s.subtopic.name,
                        "description": s.subtopic.description,
                    },
                    "quote_count": s.quote_count,
                    "entries": [
                        {
                            "summary": e.summary,
                            "quote": e.quote,
                            "source_id": e.source_id,
                            "traceable": e.traceable,
                        }
                        for e in s.entries
                    ],
                }
                for s in self.sections
            ],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Report":
        sections = [
            SubtopicSection(
                subtopic=Subtopic(
                    code=s["subtopic"]["code"],
                    name=s["subtopic"]["name"],
                    description=s["subtopic"]["description"],
                ),
                quote_count=s["quote_count"],
                entries=tuple(
                    ReportEntry(
                        summary=e["summary"],
                        quote=e["quote"],
                        source_id=e["source_id"],
                        traceable=e["traceable"],
                    )
                    for e in s["entries"]
                ),
            )
            for s in data["sections"]
        ]
        return cls(
            report_id=data["report_id"],
            dataset_id=data["dataset_id"],
            source_label=data["source_label"],
            theme=Theme(**data["theme"]),
            code_count=data["code_count"],
            sections=sections,
            totals=Totals(**data["totals"]),
            provenance=Provenance(
                prompt_version=data["provenance"]["prompt_version"],
                model_id=data["provenance"]["model_id"],
                created_at=data["provenance"]["created_at"],
                warnings=tuple(data["provenance"]["warnings"]),
            ),
        )


def build_report(
    quotes: List[QuoteEntry],
    subtopics: List[Subtopic],
    categorized: List[CategorizedQuote],
    *,
    report_id: str,
    dataset_id: str,
    source_label: str,
    theme: Theme,
    code_count: int,
    prompt_version: str,
    model_id: str,
    created_at: str,
    warnings: Optional[List[str]] = None,
) -> Report:
    """Group categorized quotes into per-subtopic sections.

    Sections run in code order with empty ones retained; the reserved
    Uncategorized section is appended last, only when it has entries.
    """
    lookup: Dict[Tuple[str, str], List[QuoteEntry]] = {}
    for q in quotes:
        lookup.setdefault((normalize_ws(q.quote), q.source_id), []).append(q)

    by_code: Dict[int, List[ReportEntry]] = {}
    for c in categorized:
        matches = lookup.get((normalize_ws(c.quote), c.source_id))
        if not matches:
            raise InconsistentInputs(
                f"categorized quote has no matching extraction entry: {c.quote[:80]!r}"
            )
        entry = matches.pop(0)
        by_code.setdefault(c.code, []).append(
            ReportEntry(
                summary=entry.summary,
                quote=entry.quote,
                source_id=entry.source_id,
                traceable=entry.traceable,
            )
        )

    sections: List[SubtopicSection] = []
    subtopic_by_code = {s.code: s for s in subtopics}
    for code in range(1, code_count + 1):
        subtopic = subtopic_by_code.get(code)
        if subtopic is None:
            raise InconsistentInputs(f"no subtopic defined for code {code}")
        entries = sorted(by_code.get(code, ()), key=lambda e: (e.source_id, e.quote))
        sections.append(
            SubtopicSection(
                subtopic=subtopic, quote_count=len(entries), entries=tuple(entries)
            )
        )
    uncategorized = sorted(
        by_code.get(UNCATEGORIZED_CODE, ()), key=lambda e: (e.source_id, e.quote)
    )
    if uncategorized:
        sections.append(
            SubtopicSection(
                subtopic=Subtopic(
                    code=UNCATEGORIZED_CODE,
                    name=UNCATEGORIZED_NAME,
                    description=UNCATEGORIZED_DESCRIPTION,
                ),
                quote_count=len(uncategorized),
                entries=tuple(uncategorized),
            )
        )

    return Report(
        report_id=report_id,
        dataset_id=dataset_id,
        source_label=source_label,
        theme=theme,
        code_count=code_count,
        sections=sections,
        totals=_totals(sections),
        provenance=Provenance(
            prompt_version=prompt_version,
            model_id=model_id,
            created_at=created_at,
            warnings=tuple(warnings or ()),
        ),
    )


def _totals(sections: List[SubtopicSection]) -> Totals:
    quotes = sum(s.quote_count for s in sections)
    traceable = sum(1 for s in sections for e in s.entries if e.traceable)
    return Totals(quotes=quotes, traceable=traceable, untraceable=quotes - traceable)


def verify_traceability(report: Report, corpus: Corpus) -> Tuple[Report, List[dict]]:
    """Recompute every entry's traceable flag against the corpus.

    Returns the re-annotated report plus the list of mismatching quotes
    (each with its claimed source), so audits can show exactly what failed.
    """
    threads = {t.thread_id: normalize_ws(t.text) for t in corpus.threads}
    mismatches: List[dict] = []
    new_sections: List[SubtopicSection] = []
    for section in report.sections:
        entries: List[ReportEntry] = []
        for entry in section.entries:
            if entry.source_id:
                if entry.source_id not in threads:
                    raise MissingThread(
                        f"source thread {entry.source_id!r} not present in corpus "
                        f"{corpus.dataset_id!r}"
                    )
                traceable = normalize_ws(entry.quote) in threads[entry.source_id]
            else:
                traceable = False
            if not traceable:
                mismatches.append(
                    {
                        "code": section.subtopic.code,
                        "source_id": entry.source_id,
                        "quote": entry.quote,
                    }
                )
            entries.append(
                ReportEntry(
                    summary=entry.summary,
                    quote=entry.quote,
                    source_id=entry.source_id,
                    traceable=traceable,
                )
            )
        new_sections.append(
            SubtopicSection(
                subtopic=section.subtopic,
                quote_count=section.quote_count,
                entries=tuple(entries),
            )
        )
    annotated = Report(
        report_id=report.report_id,
        dataset_id=report.dataset_id,
        source_label=report.source_label,
        theme=report.theme,
        code_count=report.code_count,
        sections=new_sections,
        totals=_totals(new_sections),
        provenance=report.provenance,
    )
    return annotated, mismatches


# --- exports ---


def export_jsonl(report: Report, path: Path) -> Path:
    """One header record, then one record per (section, entry)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    header = {
        "kind": "report",
        "schema_version": JSONL_SCHEMA_VERSION,
        "report_id": report.report_id,
        "dataset_id": report.dataset_id,
        "theme": {
            "title": report.theme.title,
            "description": report.theme.description,
            "origin": report.theme.origin,
        },
        "source_label": report.source_label,
        "code_count": report.code_count,
        "totals": {
            "quotes": report.totals.quotes,
            "traceable": report.totals.traceable,
            "untraceable": report.totals.untraceable,
        },
        "provenance": {
            "prompt_version": report.provenance.prompt_version,
            "model_id": report.provenance.model_id,
            "created_at": report.provenance.created_at,
            "warnings": list(report.provenance.warnings),
        },
        "subtopics": [
            {
                "code": s.subtopic.code,
                "name": s.subtopic.name,
                "description": s.subtopic.description,
            }
            for s in report.sections
        ],
    }
    lines = [dumps_compact(header)]
    for section in report.sections:
        for entry in section.entries:
            lines.append(
                dumps_compact(
                    {
                        "kind": "quote",
                        "code": section.subtopic.code,
                        "code_name": section.subtopic.name,
                        "summary": entry.summary,
                        "quote": entry.quote,
                        "source_id": entry.source_id,
                        "traceable": entry.traceable,
                    }
                )
            )
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def load_report_jsonl(path: Path) -> Report:
    """Rebuild a Report from its JSONL export (inverse of export_jsonl)."""
    with open(path, encoding="utf-8") as fh:
        records = [json.loads(line) for line in fh if line.strip()]
    if not records or records[0].get("kind") != "report":
        raise ValueError(f"{path}: not a report JSONL file")
    header = records[0]
    entries_by_code: Dict[int, List[ReportEntry]] = {}
    for record in records[1:]:
        if record.get("kind") != "quote":
            continue
        entries_by_code.setdefault(record["code"], []).append(
            ReportEntry(
                summary=record["summary"],
                quote=record["quote"],
                source_id=record["source_id"],
                traceable=record["traceable"],
            )
        )
    sections = [
        SubtopicSection(
            subtopic=Subtopic(
                code=sub["code"], name=sub["name"], description=sub["description"]
            ),
            quote_count=len(entries_by_code.get(sub["code"], ())),
            entries=tuple(entries_by_code.get(sub["code"], ())),
        )
        for sub in header["subtopics"]
    ]
    totals = Totals(**header["totals"])
    return Report(
        report_id=header["report_id"],
        dataset_id=header["dataset_id"],
        source_label=header["source_label"],
        theme=Theme(**header["theme"]),
        code_count=header["code_count"],
        sections=sections,
        totals=totals,
        provenance=Provenance(
            prompt_version=header["provenance"]["prompt_version"],
            model_id=header["provenance"]["model_id"],
            created_at=header["provenance"]["created_at"],
            warnings=tuple(header["provenance"]["warnings"]),
        ),
    )


def export_markdown(report: Report, path: Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines: List[str] = [f"# {report.theme.title}", ""]
    if report.theme.description:
        lines += [report.theme.description, ""]
    lines += [
        f"Source: {report.source_label} | Report: {report.report_id}",
        f"Quotes: {report.totals.quotes} total, "
        f"{report.totals.traceable} traceable, "
        f"{report.totals.untraceable} untraceable",
        "",
    ]
    for section in report.sections:
        lines.append(
            f"## {section.subtopic.code}. {section.subtopic.name} "
            f"({section.quote_count})"
        )
        lines.append("")
        if section.subtopic.description:
            lines += [section.subtopic.description, ""]
        for entry in section.entries:
            marker = "" if entry.traceable else " (untraceable)"
            lines.append(f"- {entry.summary}{marker}")
            for quote_line in entry.quote.splitlines() or [""]:
                lines.append(f"  > {quote_line}")
            lines.append(f"  - source: {entry.source_id or 'unresolved'}")
        lines.append("")
    path.write_text("\n".join(lines).rstrip("\n") + "\n", encoding="utf-8")
    return path
