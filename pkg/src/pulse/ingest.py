"""Archive ingestion: decode forum dump files, join posts with their
comments into unified discussion threads, and persist the corpus as CSV.

Record field names follow the de-facto public Reddit-dump schema
(id, subreddit, title, selftext, body, link_id, created_utc, author).
Threads flatten the comment hierarchy to pure chronological order so the
merged text reads in the order the discussion actually happened.
"""

from __future__ import annotations

import csv
import io
import json
import sys
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path
from typing import BinaryIO, Dict, Iterable, Iterator, List, Optional, Tuple

from . import _zstd
from .errors import SchemaMismatch, UnknownFormat, UnreadableStream

# busy threads merge into text fields far beyond csv's 128 KiB default
csv.field_size_limit(sys.maxsize)

# Separator token line between title, body, and each comment.
SEPARATOR = "\n---\n"

CSV_COLUMNS = [
    "thread_id",
    "subreddit",
    "text",
    "comment_count",
    "earliest_utc",
    "latest_utc",
]

FORMATS = ("ndjson", "zst")


@dataclass(frozen=True)
class RawPost:
    post_id: str
    subreddit: str
    title: str
    selftext: str
    created_utc: int
    author: str


@dataclass(frozen=True)
class RawComment:
    comment_id: str
    parent_post_id: str
    body: str
    created_utc: int
    author: str


@dataclass(frozen=True)
class DiscussionThread:
    thread_id: str
    subreddit: str
    text: str
    comment_count: int
    earliest_utc: int
    latest_utc: int


@dataclass
class Corpus:
    dataset_id: str
    source_label: str
    threads: List[DiscussionThread]
    ingested_at: str


@dataclass
class ParseResult:
    posts: List[RawPost]
    comments: List[RawComment]
    skipped_posts: int = 0
    skipped_comments: int = 0


@dataclass
class AggregateResult:
    corpus: Corpus
    attached_comments: int = 0
    orphaned_comments: int = 0
    duplicate_posts: int = 0


def _iter_lines(stream: BinaryIO, fmt: str) -> Iterator[str]:
    """Yield decoded text lines from a raw (optionally compressed) stream."""
    try:
        if fmt == "ndjson":
            for line in io.TextIOWrapper(stream, encoding="utf-8", errors="replace"):
                yield line
        else:  # zst
            buffer = b""
            for chunk in _zstd.iter_decompressed(stream):
                buffer += chunk
                while True:
                    nl = buffer.find(b"\n")
                    if nl < 0:
                        break
                    yield buffer[: nl + 1].decode("utf-8", "replace")
                    buffer = buffer[nl + 1 :]
            if buffer:
                yield buffer.decode("utf-8", "replace")
    except OSError as exc:
        raise UnreadableStream(f"failed reading archive stream: {exc}") from exc


def _as_created_utc(value) -> Optional[int]:
    try:
        ts = int(value)
    except (TypeError, ValueError):
        return None
    return ts if ts >= 0 else None


def _post_from_record(obj: dict) -> Optional[RawPost]:
    post_id = obj.get("id")
    created = _as_created_utc(obj.get("created_utc"))
    if not post_id or not isinstance(post_id, str) or created is None:
        return None
    return RawPost(
        post_id=post_id,
        subreddit=str(obj.get("subreddit") or ""),
        title=str(obj.get("title") or ""),
        selftext=str(obj.get("selftext") or ""),
        created_utc=created,
        author=str(obj.get("author") or ""),
    )


def _comment_from_record(obj: dict) -> Optional[RawComment]:
    comment_id = obj.get("id")
    link_id = obj.get("link_id")
    created = _as_created_utc(obj.get("created_utc"))
    if not comment_id or not isinstance(comment_id, str) or created is None:
        return None
    if not link_id or not isinstance(link_id, str):
        return None
    # comment link_ids carry a thing-type prefix ("t3_<post id>")
    parent = link_id.split("_", 1)[1] if link_id.startswith("t3_") else link_id
    if not parent:
        return None
    return RawComment(
        comment_id=comment_id,
        parent_post_id=parent,
        body=str(obj.get("body") or ""),
        created_utc=created,
        author=str(obj.get("author") or ""),
    )


def parse_archive(
    posts_stream: BinaryIO, comments_stream: BinaryIO, fmt: str = "ndjson"
) -> ParseResult:
    """Decode newline-delimited JSON dumps of posts and comments.

    Malformed lines (bad JSON, missing ids, negative timestamps) are
    counted and skipped; they never abort the stream.
    """
    if fmt not in FORMATS:
        raise UnknownFormat(f"unsupported archive format {fmt!r}; expected one of {FORMATS}")

    result = ParseResult(posts=[], comments=[])
    for line in _iter_lines(posts_stream, fmt):
        if not line.strip():
            continue
        post = None
        try:
            obj = json.loads(line)
            if isinstance(obj, dict):
                post = _post_from_record(obj)
        except json.JSONDecodeError:
            pass
        if post is None:
            result.skipped_posts += 1
        else:
            result.posts.append(post)

    for line in _iter_lines(comments_stream, fmt):
        if not line.strip():
            continue
        comment = None
        try:
            obj = json.loads(line)
            if isinstance(obj, dict):
                comment = _comment_from_record(obj)
        except json.JSONDecodeError:
            pass
        if comment is None:
            result.skipped_comments += 1
        else:
            result.comments.append(comment)

    return result


def _majority_subreddit(posts: Iterable[RawPost]) -> str:
    counts: Dict[str, int] = {}
    for post in posts:
        counts[post.subreddit] = counts.get(post.subreddit, 0) + 1
    if not counts:
        return ""
    # highest count wins; ties resolved lexicographically for determinism
    return sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))[0][0]


def aggregate_threads(
    posts: List[RawPost],
    comments: List[RawComment],
    dataset_id: Optional[str] = None,
    source_label: Optional[str] = None,
    ingested_at: Optional[str] = None,
) -> AggregateResult:
    """Merge each post with its comments into one chronological text unit.

    Duplicate post ids are dropped (first occurrence wins) and counted, so
    posts_in == threads_out + duplicate_posts. Comments whose parent post
    was never ingested are dropped and counted as orphaned.
    """
    by_id: Dict[str, RawPost] = {}
    order: List[str] = []
    duplicates = 0
    for post in posts:
        if post.post_id in by_id:
            duplicates += 1
            continue
        by_id[post.post_id] = post
        order.append(post.post_id)

    grouped: Dict[str, List[RawComment]] = {}
    orphaned = 0
    attached = 0
    for comment in comments:
        if comment.parent_post_id not in by_id:
            orphaned += 1
            continue
        grouped.setdefault(comment.parent_post_id, []).append(comment)
        attached += 1

    threads: List[DiscussionThread] = []
    for post_id in order:
        post = by_id[post_id]
        thread_comments = sorted(
            grouped.get(post_id, ()), key=lambda c: (c.created_utc, c.comment_id)
        )
        parts = [post.title, post.selftext] + [c.body for c in thread_comments]
        times = [post.created_utc] + [c.created_utc for c in thread_comments]
        threads.append(
            DiscussionThread(
                thread_id=post_id,
                subreddit=post.subreddit,
                text=SEPARATOR.join(parts),
                comment_count=len(thread_comments),
                earliest_utc=min(times),
                latest_utc=max(times),
            )
        )

    label = source_label or _majority_subreddit(by_id.values()) or "unlabeled"
    corpus = Corpus(
        dataset_id=dataset_id or f"ds-{label}",
        source_label=label,
        threads=threads,
        ingested_at=ingested_at
        or datetime.now(timezone.utc).replace(microsecond=0).isoformat(),
    )
    return AggregateResult(
        corpus=corpus,
        attached_comments=attached,
        orphaned_comments=orphaned,
        duplicate_posts=duplicates,
    )


def write_corpus_csv(corpus: Corpus, path: Path) -> Path:
    """Persist threads in the fixed 6-column CSV layout (RFC 4180 quoting)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_COLUMNS)
        for t in corpus.threads:
            writer.writerow(
                [
                    t.thread_id,
                    t.subreddit,
                    t.text,
                    t.comment_count,
                    t.earliest_utc,
                    t.latest_utc,
                ]
            )
    return path


def load_corpus(
    path: Path,
    dataset_id: Optional[str] = None,
    source_label: Optional[str] = None,
) -> Corpus:
    """Load a corpus CSV written by write_corpus_csv.

    dataset_id defaults to the file stem and source_label to the majority
    subreddit of the loaded threads; both are registration metadata, not
    part of the on-disk schema.
    """
    path = Path(path)
    threads: List[DiscussionThread] = []
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != CSV_COLUMNS:
            raise SchemaMismatch(
                f"corpus CSV header {header!r} does not match {CSV_COLUMNS!r}"
            )
        for lineno, row in enumerate(reader, start=2):
            if len(row) != len(CSV_COLUMNS):
                raise SchemaMismatch(f"row {lineno}: expected {len(CSV_COLUMNS)} columns")
            try:
                threads.append(
                    DiscussionThread(
                        thread_id=row[0],
                        subreddit=row[1],
                        text=row[2],
                        comment_count=int(row[3]),
                        earliest_utc=int(row[4]),
                        latest_utc=int(row[5]),
                    )
                )
            except ValueError as exc:
                raise SchemaMismatch(f"row {lineno}: non-integer count column: {exc}") from exc

    label = source_label or _subreddit_majority_of_threads(threads) or path.stem
    return Corpus(
        dataset_id=dataset_id or path.stem,
        source_label=label,
        threads=threads,
        ingested_at=datetime.now(timezone.utc).replace(microsecond=0).isoformat(),
    )


def _subreddit_majority_of_threads(threads: List[DiscussionThread]) -> str:
    counts: Dict[str, int] = {}
    for t in threads:
        counts[t.subreddit] = counts.get(t.subreddit, 0) + 1
    if not counts:
        return ""
    return sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))[0][0]


def ingest_archive(
    posts_path: Path,
    comments_path: Path,
    fmt: str = "auto",
    dataset_id: Optional[str] = None,
    source_label: Optional[str] = None,
) -> Tuple[ParseResult, AggregateResult]:
    """File-level convenience wrapper: open, sniff format, parse, aggregate."""
    posts_path, comments_path = Path(posts_path), Path(comments_path)
    resolved = _resolve_format(posts_path, fmt)
    try:
        with open(posts_path, "rb") as pf, open(comments_path, "rb") as cf:
            parsed = parse_archive(pf, cf, resolved)
    except OSError as exc:
        raise UnreadableStream(f"cannot open archive file: {exc}") from exc
    aggregate = aggregate_threads(
        parsed.posts,
        parsed.comments,
        dataset_id=dataset_id,
        source_label=source_label,
    )
    return parsed, aggregate


_ZSTD_MAGIC = b"\x28\xb5\x2f\xfd"


def _resolve_format(path: Path, fmt: str) -> str:
    if fmt in FORMATS:
        return fmt
    if fmt != "auto":
        raise UnknownFormat(f"unsupported archive format {fmt!r}")
    if path.suffix in (".zst", ".zstd"):
        return "zst"
    try:
        with open(path, "rb") as fh:
            head = fh.read(4)
    except OSError as exc:
        raise UnreadableStream(f"cannot open archive file: {exc}") from exc
    return "zst" if head == _ZSTD_MAGIC else "ndjson"
