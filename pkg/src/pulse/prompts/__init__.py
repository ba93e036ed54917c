"""Prompt template library.

Templates live as plain-text files (small header, then the body verbatim)
so wording can be audited without reading code. Placeholders use the
{name} / {$name} brace forms found in the bodies; substitution is a
single pass, so bound values can never be re-expanded.
"""

from __future__ import annotations

import hashlib
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, FrozenSet, Mapping, Optional, TYPE_CHECKING

from ..errors import MissingVariable, UnknownTemplate

if TYPE_CHECKING:  # pragma: no cover
    from ..pipeline import Theme

TEMPLATE_IDS = (
    "source_recommendation",
    "theme_generation",
    "quote_extraction",
    "subtopic_analysis",
    "quote_mapping",
)

_TEMPLATE_DIR = Path(__file__).parent / "templates"

# matches {name} and {$name}; never brace blocks containing quotes or
# whitespace, so JSON examples inside bodies are left untouched
_PLACEHOLDER_RE = re.compile(r"\{\$?([a-z_]+)\}")


@dataclass(frozen=True)
class PromptTemplate:
    template_id: str
    version: str
    body: str
    required_vars: FrozenSet[str]

    def render(self, binding: Mapping[str, str]) -> str:
        for name in sorted(self.required_vars):
            if not binding.get(name):
                raise MissingVariable(
                    f"template {self.template_id!r} requires a non-empty value "
                    f"for placeholder {name!r}"
                )

        def substitute(match: re.Match) -> str:
            return binding[match.group(1)]

        return _PLACEHOLDER_RE.sub(substitute, self.body)


def _parse_template_file(path: Path) -> PromptTemplate:
    raw = path.read_text(encoding="utf-8")
    header, sep, body = raw.partition("\n---\n")
    if not sep:
        raise ValueError(f"template file {path} is missing the header delimiter")
    fields: Dict[str, str] = {}
    for line in header.splitlines():
        key, _, value = line.partition(":")
        fields[key.strip()] = value.strip()
    declared = frozenset(
        v.strip() for v in fields.get("vars", "").split(",") if v.strip()
    )
    found = frozenset(_PLACEHOLDER_RE.findall(body))
    if declared != found:
        raise ValueError(
            f"template {path.name}: declared vars {sorted(declared)} do not match "
            f"placeholders found in body {sorted(found)}"
        )
    return PromptTemplate(
        template_id=fields["template_id"],
        version=fields.get("version", "1"),
        body=body,
        required_vars=declared,
    )


class PromptLibrary:
    """All five stage templates, loaded once and immutable after that."""

    def __init__(self, template_dir: Optional[Path] = None):
        directory = Path(template_dir) if template_dir else _TEMPLATE_DIR
        self._templates: Dict[str, PromptTemplate] = {}
        for template_id in TEMPLATE_IDS:
            path = directory / f"{template_id}.txt"
            template = _parse_template_file(path)
            if template.template_id != template_id:
                raise ValueError(
                    f"{path.name}: header says {template.template_id!r}"
                )
            self._templates[template_id] = template
        digest = hashlib.sha256()
        for template_id in TEMPLATE_IDS:
            t = self._templates[template_id]
            digest.update(f"{t.template_id}:{t.version}:{t.body}".encode("utf-8"))
        # fingerprint covers bodies, not just declared versions, so any
        # wording edit invalidates caches even without a version bump
        self.version = f"p1-{digest.hexdigest()[:12]}"

    def get(self, template_id: str) -> PromptTemplate:
        try:
            return self._templates[template_id]
        except KeyError:
            raise UnknownTemplate(f"no template registered as {template_id!r}") from None

    def render(self, template_id: str, binding: Mapping[str, str]) -> str:
        return self.get(template_id).render(binding)


def derive_binding_from_theme(
    theme: "Theme", source_label: str, topic: Optional[str] = None
) -> Dict[str, str]:
    """Map a selected theme onto the quote-extraction placeholders.

    The theme title drives both the theme and theme_focus slots; the
    description scopes the concerns, falling back to the title when the
    theme was typed without one. topic defaults to the source label since
    a community's name is the subject its rows discuss.
    """
    return {
        "subreddit": source_label,
        "topic": topic or source_label,
        "theme": theme.title,
        "theme_focus": theme.title,
        "concerns_scope": theme.description or theme.title,
    }
