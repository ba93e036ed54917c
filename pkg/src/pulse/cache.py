"""Content-addressed filesystem cache for stage artifacts and reports.

One plain-JSON file per key under the root directory, so cached results
stay inspectable with nothing but a text editor. Writes go through an
atomic rename; per-key locks serialize put/invalidate against each other.
"""

from __future__ import annotations

import hashlib
import json
import logging
import re
import threading
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path
from typing import Callable, Dict, Optional

from .jsonio import write_canonical

logger = logging.getLogger(__name__)

_UNSAFE_RE = re.compile(r"[^A-Za-z0-9._-]+")


def theme_digest(title: str) -> str:
    """Hash of the normalized theme title: trimmed and case-folded, so
    'Climate Change' and 'climate change' share one report."""
    normalized = title.strip().casefold()
    return hashlib.sha256(normalized.encode("utf-8")).hexdigest()[:16]


@dataclass(frozen=True)
class CacheKey:
    dataset_id: str
    stage: str
    theme_digest: str
    prompt_version: str
    model_id: str

    def __post_init__(self):
        for name, value in vars(self).items():
            if not value:
                raise ValueError(f"cache key component {name!r} must be non-empty")

    def to_string(self) -> str:
        raw = "|".join(
            (self.dataset_id, self.stage, self.theme_digest, self.prompt_version, self.model_id)
        )
        safe = "__".join(
            _UNSAFE_RE.sub("_", part)
            for part in (self.dataset_id, self.stage, self.theme_digest)
        )
        # suffix hash disambiguates keys that sanitize to the same string
        return f"{safe}-{hashlib.sha256(raw.encode('utf-8')).hexdigest()[:12]}"


@dataclass(frozen=True)
class CacheEntry:
    key: CacheKey
    artifact_path: Path
    created_at: str
    size_bytes: int


class CacheStore:
    def __init__(self, root: Path):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        self._master = threading.Lock()
        self._key_locks: Dict[str, threading.Lock] = {}
        self.corrupt_evictions = 0

    def _lock_for(self, key_string: str) -> threading.Lock:
        with self._master:
            return self._key_locks.setdefault(key_string, threading.Lock())

    def _path_for(self, key: CacheKey) -> Path:
        return self.root / f"{key.to_string()}.json"

    def get(self, key: CacheKey) -> Optional[dict]:
        """Return the artifact stored for an equal key, or None.

        A file that fails validation is evicted on the spot and reported
        as a warning rather than poisoning the caller.
        """
        path = self._path_for(key)
        if not path.is_file():
            return None
        try:
            with open(path, encoding="utf-8") as fh:
                entry = json.load(fh)
            artifact = entry["artifact"]
            stored = entry["key"]
            if stored != _key_fields(key):
                raise KeyError("key fields do not match")
        except (json.JSONDecodeError, KeyError, TypeError) as exc:
            logger.warning("evicting corrupt cache entry %s: %s", path.name, exc)
            with self._lock_for(key.to_string()):
                path.unlink(missing_ok=True)
            self.corrupt_evictions += 1
            return None
        return artifact

    def put(self, key: CacheKey, artifact: dict) -> CacheEntry:
        path = self._path_for(key)
        created_at = datetime.now(timezone.utc).replace(microsecond=0).isoformat()
        with self._lock_for(key.to_string()):
            write_canonical(
                path,
                {"key": _key_fields(key), "created_at": created_at, "artifact": artifact},
            )
            size = path.stat().st_size
        return CacheEntry(key=key, artifact_path=path, created_at=created_at, size_bytes=size)

    def invalidate(self, predicate: Callable[[CacheKey], bool]) -> int:
        removed = 0
        for path in sorted(self.root.glob("*.json")):
            try:
                with open(path, encoding="utf-8") as fh:
                    fields = json.load(fh)["key"]
                key = CacheKey(**fields)
            except (json.JSONDecodeError, KeyError, TypeError, ValueError):
                continue
            if predicate(key):
                with self._lock_for(key.to_string()):
                    path.unlink(missing_ok=True)
                removed += 1
        return removed


def _key_fields(key: CacheKey) -> dict:
    return {
        "dataset_id": key.dataset_id,
        "stage": key.stage,
        "theme_digest": key.theme_digest,
        "prompt_version": key.prompt_version,
        "model_id": key.model_id,
    }
