"""Canonical JSON serialization.

Every artifact this package persists goes through dump_canonical so that
identical data always produces identical bytes (sorted keys, fixed
indentation, UTF-8, trailing newline). Byte-stable files are what make
replay runs diffable and cache round-trips exact.
"""

from __future__ import annotations

import json
import os
import tempfile
from pathlib import Path
from typing import Any


def dumps_canonical(value: Any) -> str:
    return json.dumps(value, sort_keys=True, ensure_ascii=False, indent=2) + "\n"


def dumps_compact(value: Any) -> str:
    """One-line canonical form, used for JSONL records and hashing."""
    return json.dumps(value, sort_keys=True, ensure_ascii=False, separators=(",", ":"))


def write_canonical(path: Path, value: Any) -> None:
    """Write atomically: tmp file in the same directory, then rename."""
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(dumps_canonical(value))
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def read_json(path: Path) -> Any:
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)
